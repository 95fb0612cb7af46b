"""Decoders: S_snap calibration, linear-inverse and NNLS decoding, shift extraction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .codes import SMatrix, s_inverse
from .forward import Measurement
from .nnls import DEFAULT_REL_TOL, nnls_columns
from .scene import SubSMatrix

__all__ = [
    "EmbeddedEstimate",
    "RowSpectra",
    "calibrate_sub_s",
    "decode_inverse",
    "decode_nnls",
    "shift_extract",
    "consensus_spectrum",
]

DEFAULT_CONDITION_LIMIT = 1e8


@dataclass
class EmbeddedEstimate:
    """Reconstructed n x (n+m-1) scene with solver diagnostics."""

    estimate: np.ndarray
    method: str  # "inverse" | "nnls"
    diagnostics: dict = field(default_factory=dict)


@dataclass
class RowSpectra:
    """The n per-row spectra extracted from an embedded estimate (not renormalized)."""

    rows: np.ndarray  # (n, m)
    row_indices: np.ndarray


def _as_array(g) -> np.ndarray:
    data = g.data if isinstance(g, Measurement) else g
    return np.asarray(data, dtype=float)


def calibrate_sub_s(image, base: SMatrix) -> SubSMatrix:
    """Recover the sub-Hadamard-S matrix from the non-dispersive aperture image.

    Negatives are clamped to zero, positions where the known code mask is 0
    are zeroed, and the result is normalized by its maximum before the
    (alpha, k, S1, S2) decomposition is formed. Raises on a dark frame.
    """
    img = np.array(image, dtype=float)
    n = base.order
    if img.shape != (n, n):
        raise ValueError(f"expected {n}x{n} image, got {img.shape}")
    mask = base.entries == 1
    img = np.where(mask, np.maximum(img, 0.0), 0.0)
    scale = float(img.max())
    if scale <= 0:
        raise ValueError("dark frame: non-dispersive image has no positive signal")
    s_snap = img / scale
    alpha = float(s_snap[mask].min())
    base_f = base.as_float()
    return SubSMatrix(
        s_snap=s_snap,
        alpha=alpha,
        k=1.0 - alpha,
        s1=base_f - s_snap,
        s2=s_snap - alpha * base_f,
        base=base,
        scale=scale,
    )


def _exact_s_matrix(A: np.ndarray) -> bool:
    n = A.shape[0]
    if (n + 1) % 4 != 0:
        return False
    if not np.isin(A, (0.0, 1.0)).all():
        return False
    B = A.astype(np.int64)
    if (B.sum(axis=1) != (n + 1) // 2).any():
        return False
    target = (n + 1) * (np.eye(n, dtype=np.int64) + np.ones((n, n), dtype=np.int64))
    return bool((4 * (B.T @ B) == target).all())


def decode_inverse(coding, g, condition_limit: float = DEFAULT_CONDITION_LIMIT) -> EmbeddedEstimate:
    """Decode a measurement by solving coding @ X = g column by column.

    An exact S-matrix is inverted with its closed form; anything else goes
    through a partial-pivoting LU solve after a condition-number gate
    (default 1e8). Diagnostics carry the residual Frobenius norm.
    """
    G = _as_array(g)
    squeeze = G.ndim == 1
    if squeeze:
        G = G[:, None]
    if isinstance(coding, SMatrix):
        A = coding.as_float()
        closed_form = True
        inv = s_inverse(coding)
    else:
        A = np.asarray(coding, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"coding matrix must be square, got {A.shape}")
        closed_form = _exact_s_matrix(A)
        inv = None
    if A.shape[0] != G.shape[0]:
        raise ValueError(f"shape mismatch: coding {A.shape}, measurement {G.shape}")

    condition = None
    if closed_form:
        if inv is None:
            n = A.shape[0]
            inv = (2.0 / (n + 1)) * (2.0 * A.T - 1.0)
        X = inv @ G
    else:
        condition = float(np.linalg.cond(A))
        if not np.isfinite(condition) or condition > condition_limit:
            raise ValueError(
                f"coding matrix is near-singular: condition {condition:.3g} exceeds limit {condition_limit:g}"
            )
        X = np.linalg.solve(A, G)
    residual = float(np.linalg.norm(A @ X - G))
    if squeeze:
        X = X[:, 0]
    return EmbeddedEstimate(
        estimate=X,
        method="inverse",
        diagnostics={"residual_norm": residual, "condition": condition, "closed_form": closed_form},
    )


def decode_nnls(coding, g, rel_tol: float = DEFAULT_REL_TOL, maxiter: int | None = None) -> EmbeddedEstimate:
    """Decode by column-wise nonnegative least squares against the given coding.

    This is the MMS decoder: in the mismatch regime it is handed the ideal
    S-matrix even though the data came from S_snap. Columns are independent;
    per-column iteration counts, residuals, and cap flags land in diagnostics
    (hitting the iteration cap is flagged, not raised).
    """
    A = coding.as_float() if isinstance(coding, SMatrix) else np.asarray(coding, dtype=float)
    G = _as_array(g)
    squeeze = G.ndim == 1
    if squeeze:
        G = G[:, None]
    X, iterations, converged = nnls_columns(A, G, maxiter=maxiter, rel_tol=rel_tol)
    residuals = np.linalg.norm(A @ X - G, axis=0)
    estimate = X[:, 0] if squeeze else X
    return EmbeddedEstimate(
        estimate=estimate,
        method="nnls",
        diagnostics={
            "residual_norm": float(np.linalg.norm(residuals)),
            "iterations": iterations,
            "column_residuals": residuals,
            "capped": ~converged,
        },
    )


def shift_extract(estimate) -> RowSpectra:
    """Undo the shift embedding: row j keeps columns [j, j+m-1] of the estimate."""
    X = estimate.estimate if isinstance(estimate, EmbeddedEstimate) else np.asarray(estimate, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D embedded estimate, got shape {X.shape}")
    n, cols = X.shape
    m = cols - n + 1
    if m < 1:
        raise ValueError(f"estimate with {cols} columns cannot hold {n} shifted rows")
    rows = np.empty((n, m))
    for j in range(n):
        rows[j] = X[j, j : j + m]
    return RowSpectra(rows=rows, row_indices=np.arange(n))


def consensus_spectrum(rows: RowSpectra) -> np.ndarray:
    """Arithmetic mean across the extracted rows (the scene's rows share one spectrum)."""
    return rows.rows.mean(axis=0)
