import numpy as np
import pytest

from hadamux.codes import build_s_matrix
from hadamux.forward import NoiseSpec, add_noise, measure_snapshot
from hadamux.recon import (
    calibrate_sub_s,
    consensus_spectrum,
    decode_inverse,
    decode_nnls,
    shift_extract,
)
from hadamux.scene import make_sub_s, sample_intensity, shift_embed, synth_spectrum


def lstsq_by_normal_equations(A, G):
    """Brute-force least squares oracle: explicit normal-equation inverse."""
    return np.linalg.inv(A.T @ A) @ (A.T @ G)


class TestCalibrate:
    def test_noiseless_recovery_exact(self):
        S = build_s_matrix(31)
        sub = make_sub_s(S, sample_intensity(31, 0.4, seed=1))
        recovered = calibrate_sub_s(sub.s_snap * sub.scale, S)
        assert np.abs(recovered.s_snap - sub.s_snap).max() < 1e-12
        assert abs(recovered.k - sub.k) < 1e-12

    def test_image_equal_to_s_gives_k_zero(self):
        S = build_s_matrix(7)
        recovered = calibrate_sub_s(S.as_float(), S)
        assert np.array_equal(recovered.s_snap, S.as_float())
        assert recovered.k == 0.0

    def test_noise_propagates_through_normalization(self):
        S = build_s_matrix(127)
        sub = make_sub_s(S, sample_intensity(127, 0.4, seed=2))
        raw = sub.s_snap * sub.scale
        for sigma in (1e-3, 1e-4):
            noisy = add_noise(raw, NoiseSpec(sigma, seed=3))
            recovered = calibrate_sub_s(noisy, S)
            realized = np.abs(noisy - raw).max()
            # error bounded by the entry perturbation plus the max-shift, both <= max|e|
            assert np.abs(recovered.s_snap - sub.s_snap).max() <= 2.0 * realized / raw.max() + 1e-12

    def test_error_scales_linearly_with_sigma(self):
        S = build_s_matrix(127)
        sub = make_sub_s(S, sample_intensity(127, 0.4, seed=2))
        raw = sub.s_snap * sub.scale
        errs = []
        for sigma in (1e-3, 1e-5):
            recovered = calibrate_sub_s(add_noise(raw, NoiseSpec(sigma, seed=3)), S)
            errs.append(np.abs(recovered.s_snap - sub.s_snap).max())
        assert errs[0] / errs[1] == pytest.approx(100, rel=0.05)

    def test_dark_frame(self):
        S = build_s_matrix(7)
        with pytest.raises(ValueError, match="dark frame"):
            calibrate_sub_s(np.full((7, 7), -0.5), S)

    def test_masks_closed_positions(self):
        S = build_s_matrix(7)
        image = np.ones((7, 7))  # light where the code is closed: must be zeroed
        recovered = calibrate_sub_s(image, S)
        assert (recovered.s_snap[S.entries == 0] == 0).all()


class TestDecodeInverse:
    def test_noiseless_s_matrix_round_trip(self):
        S = build_s_matrix(31)
        F = shift_embed(synth_spectrum("solar_like", 31, seed=1), 31).embedded
        est = decode_inverse(S, S.as_float() @ F)
        assert est.diagnostics["closed_form"]
        assert np.abs(est.estimate - F).max() < 1e-10

    def test_high_disturbance_round_trip(self):
        S = build_s_matrix(31)
        sub = make_sub_s(S, sample_intensity(31, 0.9, seed=7))
        F = shift_embed(synth_spectrum("solar_like", 31, seed=2), 31).embedded
        est = decode_inverse(sub.s_snap, sub.s_snap @ F)
        assert not est.diagnostics["closed_form"]
        assert np.abs(est.estimate - F).max() < 1e-8

    def test_closed_form_detected_on_plain_array(self):
        S = build_s_matrix(7)
        est = decode_inverse(S.as_float(), np.eye(7))
        assert est.diagnostics["closed_form"]

    @pytest.mark.parametrize("seed", range(6))
    def test_matches_normal_equation_oracle_small(self, seed):
        rng = np.random.default_rng(seed)
        S = build_s_matrix(7)
        F = rng.normal(size=(7, 4))
        g = S.as_float() @ F + 0.1 * rng.normal(size=(7, 4))
        est = decode_inverse(S, g)
        oracle = lstsq_by_normal_equations(S.as_float(), g)
        assert np.abs(est.estimate - oracle).max() < 1e-8

    def test_pure_noise_variance_matches_gram_diagonal(self):
        # decoding pure noise: per-entry variance sigma^2 * 4n/(n+1)^2
        n, sigma, samples = 127, 0.7, 20000
        S = build_s_matrix(n)
        rng = np.random.default_rng(11)
        est = decode_inverse(S, rng.normal(0.0, sigma, size=(n, samples)))
        predicted = sigma**2 * 4 * n / (n + 1) ** 2
        assert est.estimate.var() == pytest.approx(predicted, rel=0.03)

    def test_rejects_singular(self):
        singular = np.ones((4, 4))
        with pytest.raises(ValueError, match="near-singular"):
            decode_inverse(singular, np.ones((4, 2)))

    def test_vector_measurement(self):
        S = build_s_matrix(7)
        x = np.linspace(0.1, 1.0, 7)
        est = decode_inverse(S, S.as_float() @ x)
        assert est.estimate.shape == (7,)
        assert np.abs(est.estimate - x).max() < 1e-10


class TestDecodeNnls:
    def test_noiseless_consistency(self):
        S = build_s_matrix(3)
        truth = np.array([[1.0], [2.0], [3.0]])
        est = decode_nnls(S, S.as_float() @ truth)
        assert np.abs(est.estimate - truth).max() < 1e-8
        assert est.method == "nnls"

    def test_vector_clamp(self):
        est = decode_nnls(np.eye(2), np.array([1.0, -1.0]))
        assert np.allclose(est.estimate, [1.0, 0.0])

    def test_diagnostics_per_column(self):
        rng = np.random.default_rng(3)
        S = build_s_matrix(7)
        g = rng.normal(size=(7, 5))
        est = decode_nnls(S, g)
        assert est.diagnostics["iterations"].shape == (5,)
        assert est.diagnostics["column_residuals"].shape == (5,)
        assert est.diagnostics["capped"].shape == (5,)
        assert (est.estimate >= 0).all()

    def test_cap_flagged_in_diagnostics(self):
        rng = np.random.default_rng(4)
        A = rng.normal(size=(20, 20))
        g = np.abs(rng.normal(size=(20, 3))) + 1.0
        est = decode_nnls(A, g, maxiter=1)
        assert est.diagnostics["capped"].all()


class TestModelMismatch:
    def test_mismatch_direction(self):
        # zero detector noise, k > 0: NNLS with the ideal S has strictly
        # positive error while the inverse with the true s_snap is exact
        S = build_s_matrix(31)
        sub = make_sub_s(S, sample_intensity(31, 0.5, seed=5))
        F = shift_embed(synth_spectrum("solar_like", 31, seed=3), 31).embedded
        g = sub.s_snap @ F
        exact = decode_inverse(sub.s_snap, g)
        assert np.abs(exact.estimate - F).max() < 1e-9
        mismatched = decode_nnls(S, g)
        assert np.abs(mismatched.estimate - F).max() > 1e-2

    def test_calibrated_equals_truth_decode(self):
        S = build_s_matrix(31)
        scene = shift_embed(synth_spectrum("solar_like", 31, seed=4), 31)
        sub = make_sub_s(S, sample_intensity(31, 0.6, seed=6))
        frame = measure_snapshot(sub, scene, NoiseSpec(0.0, 0), NoiseSpec(0.0, 0))
        calibrated = calibrate_sub_s(frame.non_dispersive, S)
        with_calibrated = decode_inverse(calibrated.s_snap, frame.dispersive).estimate
        with_truth = decode_inverse(sub.s_snap, frame.dispersive).estimate
        assert np.abs(with_calibrated - with_truth).max() < 1e-12


class TestShiftExtractAndConsensus:
    def test_round_trip_exact(self):
        f = synth_spectrum("solar_like", 19, seed=9)
        rows = shift_extract(shift_embed(f, 19).embedded)
        assert rows.rows.shape == (19, 19)
        for j in range(19):
            assert np.array_equal(rows.rows[j], f.values)

    def test_undoes_shift_structure(self):
        a, b = 0.3, 1.0
        rows = shift_extract(shift_embed(np.array([a, b]), 3).embedded)
        assert np.array_equal(rows.rows, [[a, b]] * 3)

    def test_consensus_of_identical_rows(self):
        f = synth_spectrum("solar_like", 9, seed=10)
        rows = shift_extract(shift_embed(f, 9).embedded)
        assert np.allclose(consensus_spectrum(rows), f.values, rtol=0, atol=1e-15)

    def test_consensus_is_mean(self):
        from hadamux.recon import RowSpectra

        rows = RowSpectra(rows=np.array([[0.0, 2.0], [2.0, 0.0]]), row_indices=np.arange(2))
        assert np.array_equal(consensus_spectrum(rows), [1.0, 1.0])

    def test_consensus_variance_reduction(self):
        # i.i.d. per-row noise: consensus variance is per-row variance / n
        rng = np.random.default_rng(12)
        n, m, trials = 16, 8, 4000
        from hadamux.recon import RowSpectra

        row_var = []
        cons_var = []
        for _ in range(trials):
            noise = rng.normal(size=(n, m))
            rows = RowSpectra(rows=noise, row_indices=np.arange(n))
            row_var.append(np.mean(noise**2))
            cons_var.append(np.mean(consensus_spectrum(rows) ** 2))
        assert np.mean(cons_var) * n == pytest.approx(np.mean(row_var), rel=0.05)
