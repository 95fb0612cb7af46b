import itertools

import numpy as np
import pytest

from hadamux.codes import build_s_matrix
from hadamux.nnls import nnls, nnls_columns


def nnls_by_enumeration(A, b):
    """Exact NNLS by enumerating support sets (small problems only).

    The optimum is the least-squares solution on its own support with
    nonnegative entries; scanning every support and keeping the feasible
    candidate with the smallest residual finds it.
    """
    nvar = A.shape[1]
    best_x = np.zeros(nvar)
    best_r = np.linalg.norm(b)
    for size in range(1, nvar + 1):
        for support in itertools.combinations(range(nvar), size):
            sol, *_ = np.linalg.lstsq(A[:, support], b, rcond=None)
            if (sol < -1e-12).any():
                continue
            x = np.zeros(nvar)
            x[list(support)] = np.clip(sol, 0.0, None)
            r = np.linalg.norm(A @ x - b)
            if r < best_r - 1e-12:
                best_r = r
                best_x = x
    return best_x, best_r


def assert_kkt(A, b, x, tol=1e-7):
    grad = A.T @ (b - A @ x)
    active = x <= 1e-12
    if active.any():
        assert grad[active].max() <= tol, f"active dual violated: {grad[active].max()}"
    if (~active).any():
        assert np.abs(grad[~active]).max() <= tol, f"free gradient nonzero: {np.abs(grad[~active]).max()}"


class TestAgainstEnumeration:
    @pytest.mark.parametrize("seed", range(12))
    def test_random_square_instances(self, seed):
        rng = np.random.default_rng(seed)
        A = rng.normal(size=(5, 5))
        b = rng.normal(size=5)
        x, rnorm, _, converged = nnls(A, b)
        ref_x, ref_r = nnls_by_enumeration(A, b)
        assert converged
        assert rnorm <= ref_r + 1e-8
        assert np.allclose(x, ref_x, atol=1e-6)

    @pytest.mark.parametrize("shape", [(6, 4), (4, 5)])
    def test_rectangular_instances(self, shape):
        rng = np.random.default_rng(hash(shape) % 2**32)
        A = rng.normal(size=shape)
        b = rng.normal(size=shape[0])
        x, rnorm, _, _ = nnls(A, b)
        _, ref_r = nnls_by_enumeration(A, b)
        assert (x >= 0).all()
        assert rnorm <= ref_r + 1e-8


class TestContracts:
    def test_textbook_clamp(self):
        x, rnorm, _, _ = nnls(np.eye(2), np.array([1.0, -1.0]))
        assert np.allclose(x, [1.0, 0.0], atol=1e-12)
        assert abs(rnorm - 1.0) < 1e-12

    def test_noiseless_consistency_s_matrix(self):
        S = build_s_matrix(3).as_float()
        truth = np.array([1.0, 2.0, 3.0])
        x, rnorm, _, converged = nnls(S, S @ truth)
        assert converged
        assert np.abs(x - truth).max() < 1e-8

    @pytest.mark.parametrize("seed", range(5))
    def test_outputs_nonnegative(self, seed):
        rng = np.random.default_rng(100 + seed)
        A = rng.normal(size=(9, 7))
        b = rng.normal(size=9)
        x, *_ = nnls(A, b)
        assert (x >= 0).all()

    @pytest.mark.parametrize("seed", range(8))
    def test_kkt_at_solution(self, seed):
        rng = np.random.default_rng(200 + seed)
        A = rng.normal(size=(12, 10))
        b = rng.normal(size=12)
        x, *_ = nnls(A, b)
        scale = max(1.0, np.abs(A.T @ b).max())
        assert_kkt(A, b, x, tol=1e-6 * scale)

    def test_iteration_cap_flags_not_raises(self):
        rng = np.random.default_rng(17)
        A = rng.normal(size=(30, 30))
        b = np.abs(rng.normal(size=30)) + 1.0
        x, rnorm, iterations, converged = nnls(A, b, maxiter=2)
        assert not converged
        assert iterations == 2
        assert (x >= 0).all()

    def test_columns_independent(self):
        rng = np.random.default_rng(5)
        A = rng.normal(size=(8, 8))
        B = rng.normal(size=(8, 5))
        X, iters, conv = nnls_columns(A, B)
        for c in range(5):
            xc, _, it_c, conv_c = nnls(A, B[:, c])
            assert np.allclose(X[:, c], xc, atol=1e-12)
            assert iters[c] == it_c
            assert conv[c] == conv_c

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape mismatch"):
            nnls(np.eye(3), np.ones(4))

    def test_dense_positive_solution_converges_fast(self):
        # the sweep regime: S-matrix coding, strictly positive truth
        S = build_s_matrix(31).as_float()
        truth = np.linspace(0.2, 1.0, 31)
        x, rnorm, iterations, converged = nnls(S, S @ truth)
        assert converged
        assert iterations <= 3 * 31
        assert np.abs(x - truth).max() < 1e-8
