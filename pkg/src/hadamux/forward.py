"""Forward models: slit, traditional HTS, snapshot HTS dual path, and the MMS shot."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codes import SMatrix
from .scene import EmbeddedScene, Spectrum, SubSMatrix

__all__ = [
    "NoiseSpec",
    "Measurement",
    "SnapshotFrame",
    "add_noise",
    "measure_slit",
    "measure_hts",
    "measure_snapshot",
    "measure_mms",
]

ARCHITECTURES = ("slit", "hts", "snapshot_dispersive")


@dataclass(frozen=True)
class NoiseSpec:
    """Additive white Gaussian detector noise: standard deviation plus seed."""

    sigma: float
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError(f"noise sigma must be nonnegative, got {self.sigma}")

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)

    def exposure_rngs(self, count: int) -> list[np.random.Generator]:
        """One independent stream per sequential exposure, split from the seed."""
        return [np.random.default_rng(s) for s in np.random.SeedSequence(self.seed).spawn(count)]


@dataclass
class Measurement:
    """Detector data for one architecture; shape follows the architecture contract."""

    data: np.ndarray
    architecture: str

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape


@dataclass
class SnapshotFrame:
    """One-shot dual-path capture: overlapped spectra plus the aperture image.

    Both fields derive from the same sub-Hadamard-S realization; ``truth``
    retains that realization for oracle tests only.
    """

    dispersive: Measurement
    non_dispersive: np.ndarray
    truth: SubSMatrix


def add_noise(signal, noise: NoiseSpec) -> np.ndarray:
    """Add i.i.d. Gaussian(0, sigma^2) noise; sigma = 0 returns the signal unchanged."""
    out = np.array(signal, dtype=float)
    if noise.sigma == 0:
        return out
    return out + noise.rng().normal(0.0, noise.sigma, size=out.shape)


def measure_slit(f: Spectrum, noise: NoiseSpec) -> Measurement:
    """Single-shot slit spectrometer: one noisy sample per spectral channel."""
    return Measurement(data=add_noise(f.values, noise), architecture="slit")


def measure_hts(S: SMatrix, F: EmbeddedScene, noise: NoiseSpec) -> Measurement:
    """Traditional HTS: n sequential coded exposures, fresh detector noise each.

    Row i of the output is the i-th exposure S[i] applied to the scene plus
    its own noise realization (stream i split from the seed).
    """
    if S.order != F.order:
        raise ValueError(f"order mismatch: S is {S.order}, scene is {F.order}")
    clean = S.as_float() @ F.embedded
    if noise.sigma == 0:
        return Measurement(data=clean, architecture="hts")
    cols = clean.shape[1]
    data = np.empty_like(clean)
    for i, rng in enumerate(noise.exposure_rngs(S.order)):
        data[i] = clean[i] + rng.normal(0.0, noise.sigma, size=cols)
    return Measurement(data=data, architecture="hts")


def measure_snapshot(
    sub: SubSMatrix,
    F: EmbeddedScene,
    dispersive_noise: NoiseSpec,
    nondispersive_noise: NoiseSpec,
) -> SnapshotFrame:
    """Snapshot HTS: one dispersive frame plus the non-dispersive aperture image.

    The dispersive path sees s_snap applied to the scene with a single noise
    realization; the non-dispersive camera observes the raw (unnormalized)
    intensity-modulated code with its own noise.
    """
    if sub.order != F.order:
        raise ValueError(f"order mismatch: sub matrix is {sub.order}, scene is {F.order}")
    dispersive = Measurement(
        data=add_noise(sub.s_snap @ F.embedded, dispersive_noise),
        architecture="snapshot_dispersive",
    )
    non_dispersive = add_noise(sub.s_snap * sub.scale, nondispersive_noise)
    return SnapshotFrame(dispersive=dispersive, non_dispersive=non_dispersive, truth=sub)


def measure_mms(sub: SubSMatrix, F: EmbeddedScene, noise: NoiseSpec) -> Measurement:
    """MMS shot: physically the snapshot dispersive path, with no second camera.

    With an identical seed this equals the dispersive field of
    measure_snapshot; the difference is downstream, where the decoder only
    gets the ideal S-matrix.
    """
    if sub.order != F.order:
        raise ValueError(f"order mismatch: sub matrix is {sub.order}, scene is {F.order}")
    return Measurement(
        data=add_noise(sub.s_snap @ F.embedded, noise),
        architecture="snapshot_dispersive",
    )
