"""Passive optical elements between the dot, the memory and the detector.

Scalar elements expose ``transfer(detuning_ghz) -> complex amplitude``, where
detuning is measured from the memory line (879.7 nm). Polarisation optics live
in :mod:`qdafc.jones`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .spectral import C_LIGHT, FWHM_TO_SIGMA

MEMORY_LINE_NM = 879.7


def nm_to_detuning_ghz(wavelength_nm, reference_nm: float = MEMORY_LINE_NM):
    return (C_LIGHT / (np.asarray(wavelength_nm) * 1e-9) - C_LIGHT / (reference_nm * 1e-9)) / 1e9


def detuning_ghz_to_nm(detuning_ghz, reference_nm: float = MEMORY_LINE_NM):
    nu = C_LIGHT / (reference_nm * 1e-9) + np.asarray(detuning_ghz) * 1e9
    return C_LIGHT / nu * 1e9


def nm_width_to_ghz(width_nm: float, center_nm: float) -> float:
    return C_LIGHT * width_nm * 1e-9 / (center_nm * 1e-9) ** 2 / 1e9


class ScalarElement(Protocol):
    def transfer(self, detuning_ghz) -> np.ndarray: ...


@dataclass(frozen=True)
class EtalonSpec:
    fsr_ghz: float = 50.0
    bandwidth_ghz: float = 0.7
    peak_transmission: float = 0.95
    lock_detuning_ghz: float = 0.0

    def __post_init__(self):
        if not 0 < self.bandwidth_ghz < self.fsr_ghz:
            raise ValueError("etalon needs 0 < bandwidth < FSR")
        if not 0 < self.peak_transmission <= 1:
            raise ValueError("peak transmission must be in (0, 1]")

    @property
    def finesse(self) -> float:
        return self.fsr_ghz / self.bandwidth_ghz

    @property
    def coefficient_of_finesse(self) -> float:
        return (2.0 * self.finesse / np.pi) ** 2

    @property
    def mirror_reflectivity(self) -> float:
        k = self.coefficient_of_finesse
        # 4R/(1-R)^2 = k, smaller root
        return float((k + 2.0 - 2.0 * np.sqrt(k + 1.0)) / k)

    @property
    def peak_integral_ghz(self) -> float:
        """Integral of |t|^2 over one free spectral range."""
        return self.peak_transmission * self.fsr_ghz / np.sqrt(1.0 + self.coefficient_of_finesse)

    def transfer(self, detuning_ghz):
        return etalon_transfer(detuning_ghz, self)


def etalon_transfer(detuning_ghz, e: EtalonSpec):
    """Airy amplitude transmission of a lossy Fabry-Perot; causal, periodic in the FSR."""
    r = e.mirror_reflectivity
    phi = 2.0 * np.pi * (np.asarray(detuning_ghz, dtype=float) - e.lock_detuning_ghz) / e.fsr_ghz
    return np.sqrt(e.peak_transmission) * (1.0 - r) / (1.0 - r * np.exp(-1j * phi))


@dataclass(frozen=True)
class CavitySpec:
    """Planar DBR cavity mode acting as a Lorentzian spectral weight on the source."""

    center_nm: float = 880.0
    fwhm_nm: float = 3.0

    def __post_init__(self):
        if not self.fwhm_nm > 0:
            raise ValueError("cavity fwhm must be positive")

    @property
    def q_factor(self) -> float:
        return self.center_nm / self.fwhm_nm

    def transfer(self, detuning_ghz):
        c = nm_to_detuning_ghz(self.center_nm)
        w = nm_width_to_ghz(self.fwhm_nm, self.center_nm)
        return 1.0 / (1.0 + 2j * (np.asarray(detuning_ghz, dtype=float) - c) / w)


@dataclass(frozen=True)
class BandpassFilter:
    center_nm: float = MEMORY_LINE_NM
    width_nm: float = 20.0
    transmission: float = 0.99
    blocking: float = 1e-7

    def transfer(self, detuning_ghz):
        d = np.asarray(detuning_ghz, dtype=float)
        lo = nm_to_detuning_ghz(self.center_nm + self.width_nm / 2)
        hi = nm_to_detuning_ghz(self.center_nm - self.width_nm / 2)
        inside = (d >= lo) & (d <= hi)
        return np.where(inside, np.sqrt(self.transmission), np.sqrt(self.blocking)).astype(complex)


@dataclass(frozen=True)
class FiberLink:
    """Lossy identity (the 10 m fibre, or any flat loss)."""

    transmission: float = 1.0

    def transfer(self, detuning_ghz):
        return np.full(np.shape(detuning_ghz), np.sqrt(self.transmission), dtype=complex)


@dataclass(frozen=True)
class BackgroundSpec:
    """Wetting-layer emission; density is relative to one signal photon, per GHz."""

    wetting_center_nm: float = 860.0
    wetting_fwhm_nm: float = 20.0
    relative_power_density: float = 0.0
    shape: str = "gaussian"  # or "flat"

    def __post_init__(self):
        if self.relative_power_density < 0:
            raise ValueError("background density must be non-negative")
        if self.shape not in ("gaussian", "flat"):
            raise ValueError(f"unknown background shape {self.shape!r}")

    def density(self, detuning_ghz):
        d = np.asarray(detuning_ghz, dtype=float)
        if self.shape == "flat":
            return np.full(d.shape, self.relative_power_density)
        c = nm_to_detuning_ghz(self.wetting_center_nm)
        w = nm_width_to_ghz(self.wetting_fwhm_nm, self.wetting_center_nm)
        return self.relative_power_density * np.exp(-4 * np.log(2) * ((d - c) / w) ** 2)

    def default_band(self) -> tuple[float, float]:
        c = float(nm_to_detuning_ghz(self.wetting_center_nm))
        w = nm_width_to_ghz(self.wetting_fwhm_nm, self.wetting_center_nm)
        return c - 3 * w, c + 3 * w


def filter_chain_transfer(detuning_ghz, elements: Sequence[ScalarElement]):
    if len(elements) == 0:
        raise ValueError("filter chain is empty")
    out = np.ones(np.shape(detuning_ghz), dtype=complex)
    for el in elements:
        out = out * el.transfer(detuning_ghz)
    return out


def background_leakage_rate(b: BackgroundSpec, chain: Sequence[ScalarElement], band=None,
                            exclude_central: bool = False, samples_per_fsr: int = 1024) -> float:
    """Background power passing the chain, relative to one signal photon.

    The band is cut into cells one free spectral range of the narrowest etalon
    wide, each centred on a transmission peak, and every cell is integrated with
    the midpoint rule. ``exclude_central`` drops the cell holding the locked peak,
    which is spectrally indistinguishable from the signal.
    """
    etalons = [el for el in chain if isinstance(el, EtalonSpec)]
    if not etalons:
        raise ValueError("leakage model needs at least one etalon in the chain")
    if b.relative_power_density == 0:
        return 0.0
    lo, hi = band if band is not None else b.default_band()
    narrow = min(etalons, key=lambda e: e.bandwidth_ghz)
    k = np.arange(np.ceil((lo - narrow.lock_detuning_ghz) / narrow.fsr_ghz),
                  np.floor((hi - narrow.lock_detuning_ghz) / narrow.fsr_ghz) + 1)
    if exclude_central:
        k = k[k != 0]
    step = narrow.fsr_ghz / samples_per_fsr
    offsets = (np.arange(samples_per_fsr) + 0.5) * step - narrow.fsr_ghz / 2
    total = 0.0
    for chunk in np.array_split(k, max(1, len(k) // 256)):
        d = (narrow.lock_detuning_ghz + chunk * narrow.fsr_ghz)[:, None] + offsets[None, :]
        total += float(np.sum(b.density(d) * np.abs(filter_chain_transfer(d, chain)) ** 2)) * step
    return total


def gaussian_line_density(detuning_ghz, fwhm_ghz: float):
    """Normalised (per GHz) Gaussian emission line centred on the memory line."""
    s = fwhm_ghz * FWHM_TO_SIGMA
    d = np.asarray(detuning_ghz, dtype=float)
    return np.exp(-0.5 * (d / s) ** 2) / (s * np.sqrt(2 * np.pi))
