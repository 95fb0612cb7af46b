"""Lawson-Hanson nonnegative least squares on the normal equations.

The active-set iteration runs on G = A'A and h = A'b with an incrementally
updated Cholesky factor of the passive-set block, so repeated solves against
one coding matrix (the sweep's hot path) stay cheap. Kernels are numba-jitted;
the first call in a process pays the compile (disk-cached afterwards).
"""

from __future__ import annotations

import numpy as np
from numba import njit

__all__ = ["nnls", "nnls_columns"]

DEFAULT_REL_TOL = 1e-10


@njit(cache=True, fastmath=True)
def _solve_lower(L, p, b, out):
    # forward substitution on the leading p x p block of lower-triangular L
    for i in range(p):
        s = b[i]
        for j in range(i):
            s -= L[i, j] * out[j]
        out[i] = s / L[i, i]


@njit(cache=True, fastmath=True)
def _solve_lower_t(L, p, b, out):
    # back substitution with the transpose of the same block
    for i in range(p - 1, -1, -1):
        s = b[i]
        for j in range(i + 1, p):
            s -= L[j, i] * out[j]
        out[i] = s / L[i, i]


@njit(cache=True, fastmath=True)
def _nnls_gram(G, h, maxiter, tol, x, passive, in_passive, barred, L, y, z, tmp):
    """One Lawson-Hanson solve; returns (iterations, converged)."""
    n = G.shape[0]
    for j in range(n):
        x[j] = 0.0
        in_passive[j] = False
        barred[j] = False
    w = tmp  # gradient h - Gx; x = 0 initially
    for j in range(n):
        w[j] = h[j]
    p = 0
    it = 0
    while it < maxiter:
        jbest = -1
        wbest = tol
        for j in range(n):
            if not in_passive[j] and not barred[j] and w[j] > wbest:
                wbest = w[j]
                jbest = j
        if jbest < 0:
            return it, True
        it += 1

        # Cholesky append of column jbest onto the passive block
        for i in range(p):
            y[i] = G[passive[i], jbest]
        _solve_lower(L, p, y, z)
        d = G[jbest, jbest]
        for i in range(p):
            d -= z[i] * z[i]
        if d <= 1e-13 * max(G[jbest, jbest], 1e-300):
            barred[jbest] = True  # numerically dependent on the passive set
            it -= 1
            continue
        for i in range(p):
            L[p, i] = z[i]
        L[p, p] = np.sqrt(d)
        passive[p] = jbest
        in_passive[jbest] = True
        p += 1

        while True:
            # least-squares solution restricted to the passive set
            for i in range(p):
                y[i] = h[passive[i]]
            _solve_lower(L, p, y, z)
            _solve_lower_t(L, p, z, z)
            feasible = True
            step = 1.0
            for i in range(p):
                if z[i] <= 0.0:
                    feasible = False
                    xi = x[passive[i]]
                    denom = xi - z[i]
                    if denom > 0.0:
                        s = xi / denom
                        if s < step:
                            step = s
            if feasible:
                for i in range(p):
                    x[passive[i]] = z[i]
                break
            # move toward z until the first coordinate hits zero, then drop it
            for i in range(p):
                x[passive[i]] += step * (z[i] - x[passive[i]])
            i = 0
            removed = False
            while i < p:
                if x[passive[i]] <= 1e-14:
                    x[passive[i]] = 0.0
                    in_passive[passive[i]] = False
                    for jj in range(i, p - 1):
                        passive[jj] = passive[jj + 1]
                    p -= 1
                    removed = True
                else:
                    i += 1
            if removed:
                for j in range(n):
                    barred[j] = False
                # rebuild the Cholesky factor of the shrunken passive block
                for i in range(p):
                    for j in range(i + 1):
                        s = G[passive[i], passive[j]]
                        for kk in range(j):
                            s -= L[i, kk] * L[j, kk]
                        if i == j:
                            L[i, i] = np.sqrt(s)
                        else:
                            L[i, j] = s / L[j, j]

        # gradient w = h - Gx over the passive support; G is symmetric, so
        # walking rows keeps the inner loop contiguous
        for i in range(n):
            w[i] = h[i]
        for jj in range(p):
            c = x[passive[jj]]
            if c != 0.0:
                row = passive[jj]
                for i in range(n):
                    w[i] -= c * G[row, i]
    return it, False


@njit(cache=True, fastmath=True)
def _nnls_gram_columns(G, H, maxiter, tols):
    n, cols = H.shape
    X = np.zeros((n, cols))
    iterations = np.zeros(cols, dtype=np.int64)
    converged = np.zeros(cols, dtype=np.bool_)
    x = np.zeros(n)
    passive = np.zeros(n, dtype=np.int64)
    in_passive = np.zeros(n, dtype=np.bool_)
    barred = np.zeros(n, dtype=np.bool_)
    L = np.zeros((n, n))
    y = np.zeros(n)
    z = np.zeros(n)
    tmp = np.zeros(n)
    for c in range(cols):
        it, ok = _nnls_gram(G, H[:, c].copy(), maxiter, tols[c], x, passive, in_passive, barred, L, y, z, tmp)
        for i in range(n):
            X[i, c] = x[i]
        iterations[c] = it
        converged[c] = ok
    return X, iterations, converged


def nnls_columns(A: np.ndarray, B: np.ndarray, maxiter: int | None = None, rel_tol: float = DEFAULT_REL_TOL):
    """Solve min ||A x - b||_2 s.t. x >= 0 independently for every column b of B.

    Termination is on dual feasibility: all active-set gradients at most
    rel_tol relative to the column's ||A'b||_inf (floored at 1), or on the
    iteration cap (default 3 * n_variables), in which case the best iterate
    is returned and flagged rather than raised.

    Returns (X, iterations, converged) with one entry per column.
    """
    A = np.ascontiguousarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    squeeze = B.ndim == 1
    if squeeze:
        B = B[:, None]
    if A.shape[0] != B.shape[0]:
        raise ValueError(f"shape mismatch: A is {A.shape}, b has {B.shape[0]} rows")
    nvar = A.shape[1]
    if maxiter is None:
        maxiter = 3 * nvar
    G = np.ascontiguousarray(A.T @ A)
    H = np.ascontiguousarray(A.T @ B)
    tols = rel_tol * np.maximum(1.0, np.abs(H).max(axis=0))
    X, iterations, converged = _nnls_gram_columns(G, H, maxiter, tols)
    if squeeze:
        return X[:, 0], iterations[0], bool(converged[0])
    return X, iterations, converged


def nnls(A: np.ndarray, b: np.ndarray, maxiter: int | None = None, rel_tol: float = DEFAULT_REL_TOL):
    """Single right-hand-side wrapper; returns (x, rnorm, iterations, converged)."""
    x, iterations, converged = nnls_columns(A, b, maxiter=maxiter, rel_tol=rel_tol)
    rnorm = float(np.linalg.norm(np.asarray(A, dtype=float) @ x - np.asarray(b, dtype=float)))
    return x, rnorm, int(iterations), converged
