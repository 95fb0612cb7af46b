"""Test spectra, aperture intensity fields, sub-Hadamard-S matrices, shift embeddings."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codes import SMatrix

__all__ = [
    "Spectrum",
    "IntensityField",
    "SubSMatrix",
    "EmbeddedScene",
    "synth_spectrum",
    "load_spectrum",
    "sample_intensity",
    "make_sub_s",
    "shift_embed",
]

SPECTRUM_KINDS = ("solar_like", "gaussian_lines", "flat")

# Planck's second radiation constant hc/kB in nm*K, and the visible band the
# synthetic broadband envelope spans.
_C2_NM_K = 1.43877688e7
_BAND_NM = (380.0, 780.0)
_ENVELOPE_T_K = 5800.0


@dataclass
class Spectrum:
    """Length-m nonnegative spectrum, peak-normalized to 1, optional wavelength axis."""

    values: np.ndarray
    wavelengths_nm: np.ndarray | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise ValueError(f"spectrum needs at least 2 channels, got shape {v.shape}")
        if (v < 0).any():
            raise ValueError("spectrum values must be nonnegative")
        peak = v.max()
        if peak <= 0:
            raise ValueError("spectrum must have a positive peak")
        v = v / peak
        v.setflags(write=False)
        self.values = v
        if self.wavelengths_nm is not None:
            w = np.asarray(self.wavelengths_nm, dtype=float)
            if w.shape != v.shape:
                raise ValueError("wavelength axis must match spectrum length")
            if not (np.diff(w) > 0).all():
                raise ValueError("wavelength axis must be strictly increasing")
            w.setflags(write=False)
            self.wavelengths_nm = w

    @property
    def m(self) -> int:
        return self.values.size


@dataclass
class IntensityField:
    """Aperture light-intensity samples in (0, 1], drawn with disturbance factor k."""

    order: int
    entries: np.ndarray
    k: float

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=float)
        if e.shape != (self.order, self.order):
            raise ValueError(f"expected {self.order}x{self.order} field, got {e.shape}")
        if (e <= 0).any() or (e > 1).any():
            raise ValueError("intensity entries must lie in (0, 1]")
        e.setflags(write=False)
        self.entries = e


@dataclass
class SubSMatrix:
    """Intensity-modulated coding matrix with its (alpha, k, S1, S2) decomposition.

    s_snap is the elementwise product of the base S-matrix with the aperture
    intensity, normalized to max 1; alpha is its minimum nonzero entry and
    k = 1 - alpha. s1 = S - s_snap and s2 = s_snap - alpha*S satisfy
    k*S = s1 + s2 exactly. `scale` keeps the pre-normalization maximum so the
    raw aperture image s_snap*scale can be reconstructed by the forward model.
    """

    s_snap: np.ndarray
    alpha: float
    k: float
    s1: np.ndarray
    s2: np.ndarray
    base: SMatrix
    scale: float = 1.0

    @property
    def order(self) -> int:
        return self.base.order


@dataclass
class EmbeddedScene:
    """n x (n+m-1) matrix whose row j carries the spectrum shifted right by j."""

    order: int
    spectrum_length: int
    embedded: np.ndarray


def synth_spectrum(kind: str, length: int, params: dict | None = None, seed: int = 0) -> Spectrum:
    """Generate a deterministic synthetic test spectrum.

    ``flat`` is all ones; ``gaussian_lines`` sums Gaussian lines given as
    ``params["lines"] = [(center, width, amplitude), ...]``; ``solar_like``
    is a smooth broadband envelope (Planck shape over the visible band)
    carved by seeded multiplicative absorption dips. Output is
    peak-normalized to 1 and identical for identical (kind, params, seed).
    """
    params = dict(params or {})
    if length < 2:
        raise ValueError(f"spectrum length must be at least 2, got {length}")
    x = np.arange(length, dtype=float)

    if kind == "flat":
        return Spectrum(np.ones(length))

    if kind == "gaussian_lines":
        lines = params.get("lines")
        if not lines:
            raise ValueError("gaussian_lines needs params['lines'] = [(center, width, amplitude), ...]")
        v = np.zeros(length)
        for center, width, amplitude in lines:
            if not 0 <= center < length:
                raise ValueError(f"line center {center} outside [0, {length})")
            v += amplitude * np.exp(-((x - center) ** 2) / (2.0 * width**2))
        return Spectrum(v)

    if kind == "solar_like":
        rng = np.random.default_rng(seed)
        lam = np.linspace(*_BAND_NM, length)
        envelope = lam**-5.0 / np.expm1(_C2_NM_K / (lam * _ENVELOPE_T_K))
        envelope /= envelope.max()
        n_dips = int(params.get("dips", max(4, length // 10)))
        centers = rng.uniform(0.03 * length, 0.97 * length, n_dips)
        widths = rng.uniform(0.6, 2.5, n_dips)
        depths = rng.uniform(0.1, 0.55, n_dips)
        v = envelope.copy()
        for c, w, d in zip(centers, widths, depths):
            v *= 1.0 - d * np.exp(-((x - c) ** 2) / (2.0 * w**2))
        return Spectrum(v, wavelengths_nm=lam)

    raise ValueError(f"unknown spectrum kind {kind!r}; expected one of {SPECTRUM_KINDS}")


def load_spectrum(path) -> Spectrum:
    """Load a spectrum from CSV: one column (value) or two (wavelength_nm, value).

    An optional non-numeric header line is skipped. Values are peak-normalized;
    negative values, non-monotone wavelengths, and files with fewer than two
    data rows are rejected with the offending row number.
    """
    rows: list[tuple[int, list[str]]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            rows.append((lineno, [c.strip() for c in stripped.split(",")]))
    if rows:
        try:
            [float(c) for c in rows[0][1]]
        except ValueError:
            rows = rows[1:]  # header
    if len(rows) < 2:
        raise ValueError(f"{path}: fewer than 2 data rows")

    ncols = len(rows[0][1])
    if ncols not in (1, 2):
        raise ValueError(f"{path}: expected 1 or 2 columns, got {ncols} at row {rows[0][0]}")
    values = []
    waves = []
    for lineno, cells in rows:
        if len(cells) != ncols:
            raise ValueError(f"{path}: inconsistent column count at row {lineno}")
        try:
            nums = [float(c) for c in cells]
        except ValueError:
            raise ValueError(f"{path}: non-numeric value at row {lineno}") from None
        value = nums[-1]
        if value < 0:
            raise ValueError(f"{path}: negative value at row {lineno}")
        values.append(value)
        if ncols == 2:
            waves.append(nums[0])
    if ncols == 2:
        for i in range(1, len(waves)):
            if waves[i] <= waves[i - 1]:
                raise ValueError(f"{path}: non-monotone wavelength at row {rows[i][0]}")
    return Spectrum(np.array(values), wavelengths_nm=np.array(waves) if waves else None)


def sample_intensity(order: int, k: float, seed: int = 0) -> IntensityField:
    """Sample an aperture intensity field with entries i.i.d. Uniform[1-k, 1].

    k = 0 yields the all-ones field. The draw is a pure function of the seed.
    """
    if not 0 <= k < 1:
        raise ValueError(f"disturbance factor k must satisfy 0 <= k < 1, got {k}")
    if order < 1:
        raise ValueError(f"order must be positive, got {order}")
    if k == 0:
        entries = np.ones((order, order))
    else:
        entries = np.random.default_rng(seed).uniform(1.0 - k, 1.0, size=(order, order))
    return IntensityField(order=order, entries=entries, k=float(k))


def make_sub_s(S: SMatrix, I: IntensityField) -> SubSMatrix:
    """Form the sub-Hadamard-S matrix S o I / max(S o I) with its decomposition.

    alpha is the minimum of s_snap over coded-open positions (where S = 1) and
    k = 1 - alpha is the realized disturbance, which for sampled fields can
    differ slightly from the k the field was drawn with.
    """
    if I.order != S.order:
        raise ValueError(f"order mismatch: S is {S.order}, intensity field is {I.order}")
    raw = S.entries * I.entries
    scale = float(raw.max())
    if scale <= 0:
        raise ValueError("cannot normalize: S o I is all zeros")
    s_snap = raw / scale
    mask = S.entries == 1
    alpha = float(s_snap[mask].min())
    base_f = S.as_float()
    return SubSMatrix(
        s_snap=s_snap,
        alpha=alpha,
        k=1.0 - alpha,
        s1=base_f - s_snap,
        s2=s_snap - alpha * base_f,
        base=S,
        scale=scale,
    )


def shift_embed(f, order: int) -> EmbeddedScene:
    """Embed a spectrum into the n x (n+m-1) shifted form of overlapped dispersion.

    Row j holds the spectrum at columns [j, j+m-1] and zeros elsewhere; every
    aperture row carries the same spectrum.
    """
    values = f.values if isinstance(f, Spectrum) else np.asarray(f, dtype=float)
    m = values.size
    if order < 1:
        raise ValueError(f"order must be positive, got {order}")
    if m < 2:
        raise ValueError(f"spectrum length must be at least 2, got {m}")
    embedded = np.zeros((order, order + m - 1))
    for j in range(order):
        embedded[j, j : j + m] = values
    return EmbeddedScene(order=order, spectrum_length=m, embedded=embedded)
