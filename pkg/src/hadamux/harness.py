"""Monte Carlo experiment orchestration: paired trials, k sweeps, bound aggregates."""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from functools import lru_cache
from typing import Iterator

import numpy as np

from .analysis import (
    CONSENSUS_ROW,
    METHODS,
    SnrSample,
    Summary,
    eval_bound,
    predicted_degradation_db,
    snr_db,
    summarize,
)
from .codes import build_s_matrix, is_supported_order
from .forward import NoiseSpec, measure_hts, measure_mms, measure_slit, measure_snapshot
from .recon import RowSpectra, calibrate_sub_s, consensus_spectrum, decode_inverse, decode_nnls, shift_extract
from .scene import SPECTRUM_KINDS, Spectrum, load_spectrum, make_sub_s, sample_intensity, shift_embed, synth_spectrum

__all__ = [
    "ExperimentConfig",
    "SweepResult",
    "BoundAggregate",
    "TrialArtifacts",
    "default_k_grid",
    "calibrate_sigma",
    "resolve_sigma",
    "run_trial",
    "run_sweep",
    "emit_report",
]

SEED_RULE = (
    "trial seed = SeedSequence(master_seed, spawn_key=(k_index * trials + trial_index,)); "
    "per-trial child streams in order: spectrum, intensity field, slit exposures, "
    "hts exposures, dispersive shot (shared by snapshot and mms), non-dispersive shot. "
    "Bound aggregates use spawn_key=(1, k_index, instance)."
)

SAMPLE_DTYPE = np.dtype(
    [
        ("method_code", np.int8),
        ("k", np.float64),
        ("trial", np.int32),
        ("row", np.int32),
        ("snr_db", np.float64),
    ]
)


def default_k_grid() -> tuple[float, ...]:
    """The benchmark disturbance grid 0.01, 0.02, ..., 0.99."""
    return tuple(i / 100 for i in range(1, 100))


@dataclass
class ExperimentConfig:
    """Everything a sweep needs; defaults reproduce the desk-scale benchmark."""

    order: int = 127
    spectrum_kind: str = "solar_like"
    spectrum_path: str | None = None
    spectrum_length: int | None = None
    spectrum_params: dict = field(default_factory=dict)
    sigma: float | None = None  # None: calibrate so the slit baseline hits slit_target_db
    slit_target_db: float = 6.45
    nondispersive_sigma: float = 0.0
    k_grid: tuple[float, ...] = field(default_factory=default_k_grid)
    trials: int = 100
    seed: int = 0
    methods: tuple[str, ...] = METHODS
    out_dir: str | None = None
    workers: int = 1
    bound_ks: tuple[float, ...] = (0.1, 0.5)
    bound_instances: int = 20
    bound_noise_draws: int = 32
    report_ks: tuple[float, ...] = (0.1, 0.5)
    mms_coding: str = "ideal"  # "calibrated" decodes MMS with the true S_snap (ablation)

    def __post_init__(self):
        if not is_supported_order(self.order):
            raise ValueError(f"order {self.order} is not a supported S-matrix order")
        if self.spectrum_path is None and self.spectrum_kind not in SPECTRUM_KINDS:
            raise ValueError(f"unknown spectrum kind {self.spectrum_kind!r}")
        if self.m < 2:
            raise ValueError("spectrum length must be at least 2")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        self.k_grid = tuple(float(k) for k in self.k_grid)
        for k in self.k_grid:
            if not 0 <= k < 1:
                raise ValueError(f"grid value {k} outside [0, 1)")
        self.methods = tuple(self.methods)
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ValueError(f"unknown methods {unknown}; choose from {METHODS}")
        if self.mms_coding not in ("ideal", "calibrated"):
            raise ValueError(f"mms_coding must be 'ideal' or 'calibrated', got {self.mms_coding!r}")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if self.sigma is not None and self.sigma < 0:
            raise ValueError("sigma must be nonnegative")

    @property
    def m(self) -> int:
        return self.spectrum_length if self.spectrum_length is not None else self.order


@dataclass
class BoundAggregate:
    """Per-k average of eval_bound over freshly sampled sub-matrix instances."""

    k: float
    instances: int
    noise_draws: int
    alpha_mean: float
    empirical_snr_db: float
    bound_db: float
    degradation_db: float
    predicted_degradation_db: float
    identity_residual_max: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrialArtifacts:
    """Optional per-trial captures: reconstructed spectra and raw measurements."""

    k: float
    trial: int
    truth: np.ndarray
    spectra: dict[str, np.ndarray]
    mms_row: int | None = None
    measurements: dict[str, np.ndarray] = field(default_factory=dict)


@dataclass
class SweepResult:
    """Everything a sweep produced: samples, summaries, bounds, captures, metadata."""

    config: dict
    samples: np.ndarray  # structured array, SAMPLE_DTYPE
    summaries: dict  # (method, k) -> {"rows": Summary | None, "consensus": Summary | None}
    bounds: list[BoundAggregate]
    examples: list[TrialArtifacts]
    failures: list[dict]
    meta: dict

    def iter_samples(self) -> Iterator[SnrSample]:
        for rec in self.samples:
            yield SnrSample(
                method=METHODS[rec["method_code"]],
                k=float(rec["k"]),
                trial=int(rec["trial"]),
                row=int(rec["row"]),
                snr_db=float(rec["snr_db"]),
            )


@lru_cache(maxsize=8)
def _s_matrix(order: int):
    return build_s_matrix(order)


def _child_seed(seq: np.random.SeedSequence) -> int:
    return int(seq.generate_state(1, np.uint64)[0])


def calibrate_sigma(f: Spectrum, target_slit_db: float) -> float:
    """Detector sigma that puts the mean slit SNR at the target, in expectation.

    Slit SNR is 10 log10(||f||^2 / ||e||^2) with E||e||^2 = m sigma^2, so
    sigma = sqrt(||f||^2 / (m 10^(target/10))).
    """
    power = float(f.values @ f.values)
    return math.sqrt(power / (f.m * 10 ** (target_slit_db / 10.0)))


def _spectrum_for(config: ExperimentConfig, seed: int) -> Spectrum:
    if config.spectrum_path is not None:
        return load_spectrum(config.spectrum_path)
    return synth_spectrum(config.spectrum_kind, config.m, config.spectrum_params, seed=seed)


def _reference_spectrum(config: ExperimentConfig) -> Spectrum:
    # same realization as trial stream 0 (k_grid[0], trial 0)
    seq = np.random.SeedSequence(config.seed, spawn_key=(0,))
    return _spectrum_for(config, _child_seed(seq.spawn(1)[0]))


def resolve_sigma(config: ExperimentConfig) -> float:
    """The sweep's detector sigma: explicit, or calibrated on the reference spectrum."""
    if config.sigma is not None:
        return float(config.sigma)
    return calibrate_sigma(_reference_spectrum(config), config.slit_target_db)


def _trial_seedseq(master_seed: int, stream_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=(stream_index,))


def _method_rows(samples: list[SnrSample], method: str, k: float, trial: int, rows: RowSpectra, truth: np.ndarray):
    """Append per-row and consensus samples; return (consensus vector, row SNRs)."""
    row_snrs = np.array([snr_db(truth, rows.rows[j]) for j in range(rows.rows.shape[0])])
    for j, value in enumerate(row_snrs):
        samples.append(SnrSample(method=method, k=k, trial=trial, row=j, snr_db=float(value)))
    consensus = consensus_spectrum(rows)
    samples.append(
        SnrSample(method=method, k=k, trial=trial, row=CONSENSUS_ROW, snr_db=snr_db(truth, consensus))
    )
    return consensus, row_snrs


def _run_trial(
    config: ExperimentConfig,
    k: float,
    trial_seed,
    trial_index: int,
    sigma: float | None = None,
    capture_spectra: bool = False,
    capture_measurements: bool = False,
) -> tuple[list[SnrSample], TrialArtifacts | None]:
    seq = trial_seed if isinstance(trial_seed, np.random.SeedSequence) else np.random.SeedSequence(trial_seed)
    children = seq.spawn(6)
    spectrum_seed, intensity_seed, slit_seed, hts_seed, disp_seed, nondisp_seed = (
        _child_seed(c) for c in children
    )
    n = config.order
    S = _s_matrix(n)
    if sigma is None:
        sigma = resolve_sigma(config)

    f = _spectrum_for(config, spectrum_seed)
    truth = f.values
    F = shift_embed(f, n)
    intensity = sample_intensity(n, k, intensity_seed)
    sub = make_sub_s(S, intensity)

    samples: list[SnrSample] = []
    artifacts = None
    if capture_spectra or capture_measurements:
        artifacts = TrialArtifacts(k=k, trial=trial_index, truth=truth.copy(), spectra={})

    calibrated = None
    for method in config.methods:
        if method == "slit":
            exposures = np.stack(
                [
                    measure_slit(f, NoiseSpec(sigma, _child_seed(c))).data
                    for c in np.random.SeedSequence(slit_seed).spawn(n)
                ]
            )
            rows = RowSpectra(rows=exposures, row_indices=np.arange(n))
            consensus, _ = _method_rows(samples, method, k, trial_index, rows, truth)
            if capture_measurements:
                artifacts.measurements["slit"] = exposures
        elif method == "hts":
            g = measure_hts(S, F, NoiseSpec(sigma, hts_seed))
            rows = shift_extract(decode_inverse(S, g))
            consensus, _ = _method_rows(samples, method, k, trial_index, rows, truth)
            if capture_measurements:
                artifacts.measurements["hts"] = g.data
        elif method == "snapshot":
            frame = measure_snapshot(
                sub, F, NoiseSpec(sigma, disp_seed), NoiseSpec(config.nondispersive_sigma, nondisp_seed)
            )
            calibrated = calibrate_sub_s(frame.non_dispersive, S)
            rows = shift_extract(decode_inverse(calibrated.s_snap, frame.dispersive))
            consensus, _ = _method_rows(samples, method, k, trial_index, rows, truth)
            if capture_measurements:
                artifacts.measurements["snapshot_dispersive"] = frame.dispersive.data
                artifacts.measurements["snapshot_nondispersive"] = frame.non_dispersive
        elif method == "mms":
            g = measure_mms(sub, F, NoiseSpec(sigma, disp_seed))
            coding = sub.s_snap if config.mms_coding == "calibrated" else S
            rows = shift_extract(decode_nnls(coding, g))
            consensus, row_snrs = _method_rows(samples, method, k, trial_index, rows, truth)
            if capture_spectra:
                # deterministic stand-in for "the spectrum with the median SNR"
                median_row = int(np.argsort(row_snrs, kind="stable")[(len(row_snrs) - 1) // 2])
                artifacts.spectra["mms"] = rows.rows[median_row].copy()
                artifacts.mms_row = median_row
            if capture_measurements:
                artifacts.measurements["mms"] = g.data
            continue
        if capture_spectra:
            artifacts.spectra[method] = np.asarray(consensus, dtype=float)
    return samples, artifacts


def run_trial(config: ExperimentConfig, k: float, trial_seed, trial_index: int = 0) -> list[SnrSample]:
    """Run one paired scene + noise realization through every configured method.

    All methods share the trial's spectrum and intensity field; snapshot and
    MMS additionally share the dispersive noise realization, so SNR
    differences within a trial are attributable to the method.
    """
    if not 0 <= k < 1:
        raise ValueError(f"disturbance k must lie in [0, 1), got {k}")
    samples, _ = _run_trial(config, k, trial_seed, trial_index)
    return samples


def _sweep_task(args):
    config, k_index, k, trial_index, sigma, capture = args
    started = time.perf_counter()
    try:
        seq = _trial_seedseq(config.seed, k_index * config.trials + trial_index)
        samples, artifacts = _run_trial(
            config, k, seq, trial_index, sigma=sigma, capture_spectra=capture
        )
        snr = np.array([s.snr_db for s in samples])
        return k_index, trial_index, snr, artifacts, time.perf_counter() - started, None
    except Exception as exc:  # recorded per trial; the sweep continues
        return k_index, trial_index, None, None, time.perf_counter() - started, f"{type(exc).__name__}: {exc}"


def _bound_aggregate(config: ExperimentConfig, k_index: int, k: float) -> BoundAggregate:
    S = _s_matrix(config.order)
    reports = []
    for i in range(config.bound_instances):
        seq = np.random.SeedSequence(config.seed, spawn_key=(1, k_index, i))
        intensity_child, noise_child = seq.spawn(2)
        sub = make_sub_s(S, sample_intensity(config.order, k, _child_seed(intensity_child)))
        draws = np.random.default_rng(_child_seed(noise_child)).normal(
            size=(config.bound_noise_draws, config.order)
        )
        reports.append(eval_bound(sub, draws))
    return BoundAggregate(
        k=k,
        instances=len(reports),
        noise_draws=config.bound_noise_draws,
        alpha_mean=float(np.mean([r.alpha for r in reports])),
        empirical_snr_db=float(np.mean([r.empirical_snr_db for r in reports])),
        bound_db=float(np.mean([r.bound_db for r in reports])),
        degradation_db=float(np.mean([r.degradation_db for r in reports])),
        predicted_degradation_db=predicted_degradation_db(k),
        identity_residual_max=float(np.max([r.identity_residual for r in reports])),
    )


def _config_echo(config: ExperimentConfig, sigma: float) -> dict:
    echo = asdict(config)
    for key, value in echo.items():
        if isinstance(value, tuple):
            echo[key] = list(value)
    echo["resolved_sigma"] = sigma
    echo["spectrum_length_resolved"] = config.m
    echo["seed_rule"] = SEED_RULE
    return echo


def run_sweep(config: ExperimentConfig) -> SweepResult:
    """Sweep the k grid with `trials` paired realizations per value.

    Trial seeds follow the documented splitting rule, so reruns with one
    master seed are byte-identical regardless of worker count; failed trials
    are recorded and skipped. Figure captures are taken from trial 0 of each
    reporting k, and bound aggregates are evaluated on the bound_ks sub-grid.
    """
    started = time.time()
    sigma = resolve_sigma(config)
    n = config.order
    _s_matrix(n)  # fail early and warm the cache before forking

    capture_indices = {
        ki for ki, k in enumerate(config.k_grid) if any(math.isclose(k, rk) for rk in config.report_ks)
    }
    tasks = [
        (config, ki, k, t, sigma, t == 0 and ki in capture_indices)
        for ki, k in enumerate(config.k_grid)
        for t in range(config.trials)
    ]

    outcomes = {}
    if config.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            for out in pool.map(_sweep_task, tasks, chunksize=4):
                outcomes[(out[0], out[1])] = out
    else:
        for task in tasks:
            out = _sweep_task(task)
            outcomes[(out[0], out[1])] = out

    block = len(config.methods) * (n + 1)
    records = np.empty(len(tasks) * block, dtype=SAMPLE_DTYPE)
    method_codes = np.repeat(
        np.array([METHODS.index(m) for m in config.methods], dtype=np.int8), n + 1
    )
    row_pattern = np.tile(np.concatenate([np.arange(n, dtype=np.int32), [CONSENSUS_ROW]]), len(config.methods))

    examples: list[TrialArtifacts] = []
    failures: list[dict] = []
    trial_seconds = []
    filled = 0
    for ki, k in enumerate(config.k_grid):
        for t in range(config.trials):
            k_index, trial_index, snr, artifacts, elapsed, error = outcomes[(ki, t)]
            trial_seconds.append(elapsed)
            if error is not None:
                failures.append({"k": k, "trial": t, "error": error})
                continue
            chunk = records[filled : filled + block]
            chunk["method_code"] = method_codes
            chunk["k"] = k
            chunk["trial"] = t
            chunk["row"] = row_pattern
            chunk["snr_db"] = snr
            filled += block
            if artifacts is not None:
                examples.append(artifacts)
    records = records[:filled]

    summaries = {}
    for method in config.methods:
        code = METHODS.index(method)
        by_method = records[records["method_code"] == code]
        for k in config.k_grid:
            group = by_method[by_method["k"] == k]
            rows_vals = group["snr_db"][group["row"] != CONSENSUS_ROW]
            cons_vals = group["snr_db"][group["row"] == CONSENSUS_ROW]
            summaries[(method, k)] = {
                "rows": _try_summary(rows_vals),
                "consensus": _try_summary(cons_vals),
            }

    bounds = [_bound_aggregate(config, ki, k) for ki, k in enumerate(config.bound_ks)]

    finished = time.time()
    meta = {
        "started_utc": datetime.fromtimestamp(started, tz=timezone.utc).isoformat(),
        "finished_utc": datetime.fromtimestamp(finished, tz=timezone.utc).isoformat(),
        "wall_seconds": finished - started,
        "trial_seconds_total": float(np.sum(trial_seconds)) if trial_seconds else 0.0,
        "trial_seconds_max": float(np.max(trial_seconds)) if trial_seconds else 0.0,
        "workers": config.workers,
        "n_trials": len(tasks),
        "n_failures": len(failures),
        "seed_rule": SEED_RULE,
    }
    return SweepResult(
        config=_config_echo(config, sigma),
        samples=records,
        summaries=summaries,
        bounds=bounds,
        examples=examples,
        failures=failures,
        meta=meta,
    )


def _try_summary(values) -> Summary | None:
    try:
        return summarize(values)
    except ValueError:
        return None


# emit_report is implemented with the other writers; re-exported here because
# it is part of the harness surface.
from .report import emit_report  # noqa: E402  (cycle-free: report does not import harness)
