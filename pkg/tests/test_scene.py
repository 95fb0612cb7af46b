import numpy as np
import pytest

from hadamux.codes import build_s_matrix
from hadamux.recon import shift_extract
from hadamux.scene import (
    IntensityField,
    Spectrum,
    load_spectrum,
    make_sub_s,
    sample_intensity,
    shift_embed,
    synth_spectrum,
)


class TestSynthSpectrum:
    def test_flat(self):
        f = synth_spectrum("flat", 5, seed=99)
        assert np.array_equal(f.values, np.ones(5))

    def test_gaussian_line_matches_analytic(self):
        f = synth_spectrum("gaussian_lines", 100, {"lines": [(50, 3.0, 1.0)]}, seed=7)
        x = np.arange(100.0)
        expected = np.exp(-((x - 50) ** 2) / (2 * 3.0**2))
        assert np.allclose(f.values, expected / expected.max(), atol=1e-12)
        assert f.values.argmax() == 50
        assert f.values.max() == 1.0

    def test_solar_like_deterministic(self):
        a = synth_spectrum("solar_like", 127, seed=1)
        b = synth_spectrum("solar_like", 127, seed=1)
        assert np.array_equal(a.values, b.values)
        c = synth_spectrum("solar_like", 127, seed=2)
        assert not np.array_equal(a.values, c.values)

    def test_solar_like_shape(self):
        f = synth_spectrum("solar_like", 127, seed=1)
        assert f.values.max() == 1.0
        assert (f.values > 0).all()
        assert f.wavelengths_nm is not None and f.wavelengths_nm.size == 127

    def test_rejects_short(self):
        with pytest.raises(ValueError, match="at least 2"):
            synth_spectrum("flat", 1)

    def test_rejects_line_center_out_of_range(self):
        with pytest.raises(ValueError, match="outside"):
            synth_spectrum("gaussian_lines", 10, {"lines": [(12, 1.0, 1.0)]})

    def test_rejects_unknown_kind(self):
        with pytest.raises(ValueError, match="unknown spectrum kind"):
            synth_spectrum("neon", 10)


class TestLoadSpectrum:
    def _write(self, tmp_path, text):
        p = tmp_path / "spec.csv"
        p.write_text(text)
        return p

    def test_single_column(self, tmp_path):
        f = load_spectrum(self._write(tmp_path, "0.5\n1.0\n0.25\n"))
        assert np.allclose(f.values, [0.5, 1.0, 0.25])

    def test_normalizes_by_peak(self, tmp_path):
        f = load_spectrum(self._write(tmp_path, "2\n4\n"))
        assert np.allclose(f.values, [0.5, 1.0])

    def test_negative_value_reports_row(self, tmp_path):
        with pytest.raises(ValueError, match="negative value at row 2"):
            load_spectrum(self._write(tmp_path, "1\n-1\n"))

    def test_two_columns_with_header(self, tmp_path):
        f = load_spectrum(self._write(tmp_path, "wavelength_nm,value\n400,1\n410,2\n420,1\n"))
        assert np.allclose(f.values, [0.5, 1.0, 0.5])
        assert np.allclose(f.wavelengths_nm, [400, 410, 420])

    def test_non_monotone_wavelengths(self, tmp_path):
        with pytest.raises(ValueError, match="non-monotone wavelength at row 3"):
            load_spectrum(self._write(tmp_path, "400,1\n410,2\n405,1\n"))

    def test_too_few_rows(self, tmp_path):
        with pytest.raises(ValueError, match="fewer than 2"):
            load_spectrum(self._write(tmp_path, "1.0\n"))


class TestSampleIntensity:
    def test_zero_disturbance_is_all_ones(self):
        field = sample_intensity(7, 0.0, seed=42)
        assert np.array_equal(field.entries, np.ones((7, 7)))

    def test_support(self):
        field = sample_intensity(127, 0.5, seed=3)
        assert field.entries.min() >= 0.5
        assert field.entries.max() <= 1.0

    def test_mean_matches_uniform_law(self):
        field = sample_intensity(127, 0.5, seed=3)
        assert abs(field.entries.mean() - 0.75) < 0.01

    def test_deterministic(self):
        a = sample_intensity(31, 0.3, seed=11)
        b = sample_intensity(31, 0.3, seed=11)
        assert np.array_equal(a.entries, b.entries)

    @pytest.mark.parametrize("k", [-0.1, 1.0, 1.5])
    def test_rejects_bad_k(self, k):
        with pytest.raises(ValueError, match="0 <= k < 1"):
            sample_intensity(7, k)


class TestMakeSubS:
    def test_uniform_intensity_reduces_to_s(self):
        S = build_s_matrix(7)
        sub = make_sub_s(S, sample_intensity(7, 0.0, seed=0))
        assert np.array_equal(sub.s_snap, S.as_float())
        assert sub.alpha == 1.0
        assert sub.k == 0.0
        assert np.abs(sub.s1).max() == 0.0
        assert np.abs(sub.s2).max() == 0.0

    def test_hand_evaluated_single_dip(self):
        S = build_s_matrix(3)
        i, j = np.argwhere(S.entries == 1)[0]
        entries = np.ones((3, 3))
        entries[i, j] = 0.5
        sub = make_sub_s(S, IntensityField(order=3, entries=entries, k=0.5))
        expected = S.as_float()
        expected[i, j] = 0.5
        assert np.allclose(sub.s_snap, expected, atol=1e-15)
        assert sub.alpha == 0.5
        assert sub.k == 0.5

    @pytest.mark.parametrize("order,k,seed", [(7, 0.3, 0), (31, 0.9, 5), (127, 0.5, 2)])
    def test_decomposition_identities(self, order, k, seed):
        S = build_s_matrix(order)
        sub = make_sub_s(S, sample_intensity(order, k, seed=seed))
        base = S.as_float()
        assert np.abs(sub.k * base - (sub.s1 + sub.s2)).max() < 1e-12
        assert np.abs((base - sub.s1) - sub.s_snap).max() < 1e-12
        assert np.abs((sub.alpha * base + sub.s2) - sub.s_snap).max() < 1e-12
        # support constraints
        assert sub.s_snap.min() >= 0 and sub.s_snap.max() <= 1
        assert (sub.s_snap[S.entries == 0] == 0).all()
        assert sub.s1.min() >= 0 and sub.s1.max() < 1
        assert sub.s2.min() >= -1e-15 and sub.s2.max() <= sub.k + 1e-15

    def test_s1_s2_same_mean_on_coded_positions(self):
        # the decomposition's two parts should be identically distributed
        S = build_s_matrix(127)
        sub = make_sub_s(S, sample_intensity(127, 0.5, seed=9))
        mask = S.entries == 1
        m1 = sub.s1[mask].mean()
        m2 = sub.s2[mask].mean()
        assert abs(m1 - m2) / max(m1, m2) < 0.10

    def test_order_mismatch(self):
        with pytest.raises(ValueError, match="order mismatch"):
            make_sub_s(build_s_matrix(7), sample_intensity(11, 0.1, seed=0))


class TestShiftEmbed:
    def test_two_channel_example(self):
        scene = shift_embed(np.array([0.4, 1.0]), 3)
        a, b = 0.4, 1.0
        expected = np.array([[a, b, 0, 0], [0, a, b, 0], [0, 0, a, b]])
        assert np.array_equal(scene.embedded, expected)

    def test_single_row(self):
        f = Spectrum(np.array([0.2, 1.0, 0.7]))
        scene = shift_embed(f, 1)
        assert np.array_equal(scene.embedded, f.values[None, :])

    def test_column_sums_match_full_correlation(self):
        f = synth_spectrum("solar_like", 20, seed=4).values
        n = 9
        scene = shift_embed(f, n)
        expected = np.convolve(f, np.ones(n))
        assert np.allclose(scene.embedded.sum(axis=0), expected, atol=1e-12)

    def test_round_trip_with_extract(self):
        f = synth_spectrum("solar_like", 31, seed=8)
        rows = shift_extract(shift_embed(f, 31).embedded)
        for j in range(31):
            assert np.array_equal(rows.rows[j], f.values)


class TestSpectrumType:
    def test_rejects_negative(self):
        with pytest.raises(ValueError, match="nonnegative"):
            Spectrum(np.array([1.0, -0.1]))

    def test_rejects_all_zero(self):
        with pytest.raises(ValueError, match="positive peak"):
            Spectrum(np.zeros(4))

    def test_normalizes(self):
        f = Spectrum(np.array([1.0, 3.0]))
        assert np.allclose(f.values, [1 / 3, 1.0])
        assert f.m == 2
