"""SNR metrics, summary statistics, and the disturbance lower-bound machinery."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .codes import s_inverse
from .scene import SubSMatrix

__all__ = [
    "CONSENSUS_ROW",
    "SnrSample",
    "Summary",
    "BoundReport",
    "snr_db",
    "summarize",
    "eval_bound",
    "theoretical_multiplex_gain",
    "predicted_degradation_db",
]

METHODS = ("slit", "hts", "snapshot", "mms")
CONSENSUS_ROW = -1  # row index sentinel for consensus samples


@dataclass(frozen=True)
class SnrSample:
    """One SNR observation: method, disturbance k, trial, row (or consensus)."""

    method: str
    k: float
    trial: int
    row: int  # CONSENSUS_ROW marks the consensus spectrum
    snr_db: float


@dataclass
class Summary:
    """Sample statistics with both interval styles and tail quantiles.

    ci95_mean is the mean's confidence interval (mean +- 1.96 std/sqrt(N));
    population95 is the sample spread (mean +- 1.96 std). Exact
    reconstructions (infinite SNR sentinels) are excluded from the statistics
    and counted in n_excluded_exact.
    """

    mean_db: float
    std_db: float
    ci95_mean: tuple[float, float]
    population95: tuple[float, float]
    quantiles: dict[str, float]
    n: int
    n_excluded_exact: int = 0

    def to_dict(self) -> dict:
        return {
            "mean_db": self.mean_db,
            "std_db": self.std_db,
            "ci95_mean": list(self.ci95_mean),
            "population95": list(self.population95),
            "quantiles": dict(self.quantiles),
            "n": self.n,
            "n_excluded_exact": self.n_excluded_exact,
        }


@dataclass
class BoundReport:
    """Evaluation of the disturbance decomposition and its SNR lower bound.

    p_matrix is S1'S2 + S2'S1 + ((2-k)/(1-k)) S2'S2; identity_residual checks
    (S - S1)'(S - S1) = (1-k)^2 S'S + ((1-k)/k) P, which holds algebraically.
    empirical_snr_db and bound_db average the quadratic-form SNR and its
    lower bound over the supplied noise draws; degradation_db is the
    HTS-decode mean minus the snapshot-decode mean on the same draws.
    """

    k: float
    alpha: float
    p_matrix: np.ndarray
    identity_residual: float
    empirical_snr_db: float
    bound_db: float
    degradation_db: float


def snr_db(truth, estimate) -> float:
    """10 log10(||f||^2 / ||f - f_hat||^2); an exact match returns +inf."""
    t = np.asarray(truth, dtype=float).ravel()
    e = np.asarray(estimate, dtype=float).ravel()
    if t.shape != e.shape:
        raise ValueError(f"length mismatch: truth {t.size}, estimate {e.size}")
    signal = float(t @ t)
    if signal <= 0:
        raise ValueError("truth spectrum is all zeros")
    diff = t - e
    err = float(diff @ diff)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(signal / err)


def summarize(samples) -> Summary:
    """Reduce SNR samples (SnrSample objects or plain floats) to a Summary."""
    values = np.array([s.snr_db if isinstance(s, SnrSample) else float(s) for s in samples], dtype=float)
    finite = np.sort(values[np.isfinite(values)])  # fixed accumulation order: bit-stable, permutation-invariant
    excluded = int(values.size - finite.size)
    if finite.size < 2:
        raise ValueError(f"need at least 2 finite samples, got {finite.size}")
    mean = float(finite.mean())
    std = float(finite.std(ddof=1))
    half_ci = 1.96 * std / math.sqrt(finite.size)
    half_pop = 1.96 * std
    q = np.quantile(finite, (0.025, 0.5, 0.975))
    return Summary(
        mean_db=mean,
        std_db=std,
        ci95_mean=(mean - half_ci, mean + half_ci),
        population95=(mean - half_pop, mean + half_pop),
        quantiles={"2.5%": float(q[0]), "50%": float(q[1]), "97.5%": float(q[2])},
        n=int(finite.size),
        n_excluded_exact=excluded,
    )


def _mean_quadform_db(num: np.ndarray, den: np.ndarray) -> float:
    return float(np.mean(10.0 * np.log10(num / den)))


def eval_bound(sub: SubSMatrix, noise_samples) -> BoundReport:
    """Evaluate the S1/S2 decomposition identity and the SNR lower bound.

    noise_samples is a (num_samples, n) array of detector-noise vectors. For
    each draw e the snapshot-decoded noise is e' = s_snap^-1 e and the
    empirical SNR is 10 log10(e'e / e''e'); the bound replaces the coding
    quadratic form by S'S and adds 10 log10(1 - k). At k = 0 the
    decomposition is trivial (P = 0) and bound equals empirical.
    """
    k = sub.k
    if k >= 1:
        raise ValueError(f"disturbance k must be below 1, got {k}")
    E = np.atleast_2d(np.asarray(noise_samples, dtype=float))
    n = sub.order
    if E.shape[1] != n:
        raise ValueError(f"noise samples must have length {n}, got {E.shape[1]}")

    S = sub.base.as_float()
    StS = S.T @ S
    if k == 0:
        p_matrix = np.zeros((n, n))
        identity_residual = 0.0
    else:
        p_matrix = sub.s1.T @ sub.s2 + sub.s2.T @ sub.s1 + ((2.0 - k) / (1.0 - k)) * (sub.s2.T @ sub.s2)
        lhs = sub.s_snap.T @ sub.s_snap  # S - S1 = s_snap
        rhs = (1.0 - k) ** 2 * StS + ((1.0 - k) / k) * p_matrix
        identity_residual = float(np.abs(lhs - rhs).max())

    noise_power = np.einsum("ij,ij->i", E, E)
    decoded = np.linalg.solve(sub.s_snap, E.T)  # (n, num)
    decoded_power = np.einsum("ji,ji->i", decoded, decoded)
    sts_form = np.einsum("ji,ji->i", decoded, StS @ decoded)
    empirical = _mean_quadform_db(noise_power, decoded_power)
    bound = _mean_quadform_db(sts_form, decoded_power) + 10.0 * math.log10(1.0 - k)

    hts_decoded = s_inverse(sub.base) @ E.T
    hts_power = np.einsum("ji,ji->i", hts_decoded, hts_decoded)
    hts_db = _mean_quadform_db(noise_power, hts_power)

    return BoundReport(
        k=k,
        alpha=sub.alpha,
        p_matrix=p_matrix,
        identity_residual=identity_residual,
        empirical_snr_db=empirical,
        bound_db=bound,
        degradation_db=hts_db - empirical,
    )


def theoretical_multiplex_gain(order: int) -> float:
    """Noise-power reduction of S-matrix decoding vs a direct measurement, in dB.

    10 log10((n+1)^2 / (4n)), from the constant diagonal 4n/(n+1)^2 of
    (S'S)^-1.
    """
    n = int(order)
    if n < 1:
        raise ValueError(f"order must be positive, got {order}")
    return 10.0 * math.log10((n + 1) ** 2 / (4.0 * n))


def predicted_degradation_db(k: float) -> float:
    """Predicted snapshot-vs-HTS SNR degradation 10 log10(1/(1-k)) at disturbance k."""
    if not 0 <= k < 1:
        raise ValueError(f"disturbance k must lie in [0, 1), got {k}")
    return 10.0 * math.log10(1.0 / (1.0 - k))
