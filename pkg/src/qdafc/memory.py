"""Atomic-frequency-comb memory as a linear optical filter.

The prepared comb is described by a complex optical depth ``D(nu)`` whose real
part is the absorption profile and whose imaginary part is its Kramers-Kronig
partner. A weak field crossing the crystals is multiplied by
``H(nu) = exp(-D(nu)/2)``. Because ``D`` is periodic with period ``Delta``
inside the comb band, ``H`` carries Fourier components at delays ``k/Delta``:
the transmitted pulse, the first echo at ``1/Delta``, the second at ``2/Delta``...

Comb parameters use MHz, grids use Hz, reported times use ns.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from . import jones
from .spectral import (
    FWHM_TO_SIGMA,
    FrequencyGrid,
    SpectralField,
    causal_completion,
    gaussian_pulse,
    to_time_domain,
)

TOOTH_SHAPES = ("gaussian", "lorentzian", "square")
GAUSSIAN_DEPTH_FACTOR = np.sqrt(np.pi / (4.0 * np.log(2.0)))


class TilingError(ValueError):
    """Comb period does not tile the pump sweep."""


class CombWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PumpSequenceSpec:
    comb_period_mhz: float
    sweep_span_mhz: float = 100.0
    cycle_duration_us: float = 200.0
    sideband_driver_mhz: float = 100.0
    sideband_orders: int = 2
    preparation_duration_ms: float = 11.5

    def __post_init__(self):
        if not self.comb_period_mhz > 0:
            raise ValueError("comb period must be positive")
        if self.sideband_orders < 0:
            raise ValueError("sideband orders must be >= 0")
        for name, value in (("sweep span", self.sweep_span_mhz), ("sideband driver", self.sideband_driver_mhz)):
            ratio = value / self.comb_period_mhz
            if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
                raise TilingError(f"{name} {value} MHz is not a whole number of {self.comb_period_mhz} MHz periods")

    @property
    def bandwidth_mhz(self) -> float:
        return self.sweep_span_mhz * (2 * self.sideband_orders + 1)

    @property
    def storage_time_ns(self) -> float:
        return 1e3 / self.comb_period_mhz

    @property
    def cycles(self) -> int:
        return int(self.preparation_duration_ms * 1e3 // self.cycle_duration_us)


@dataclass(frozen=True)
class MaterialSpec:
    aux_lifetime_ms: float = 42.9
    line_center_nm: float = 879.7
    min_tooth_fwhm_mhz: float = 0.0

    def __post_init__(self):
        if not self.aux_lifetime_ms > 0:
            raise ValueError("auxiliary-state lifetime must be positive")
        if self.min_tooth_fwhm_mhz < 0:
            raise ValueError("tooth-width floor must be non-negative")


@dataclass(frozen=True)
class SandwichSpec:
    """Two crystals with a half-wave plate between them.

    ``depth_h``/``depth_v`` are the relative optical depths along and across
    the c axis; the comb's total depth is shared between them. A final
    frame-restoring HWP at 45 deg undoes the H<->V swap of the middle plate.
    ``crystal_mismatch`` scales the second crystal's depth (0 = identical).
    """

    depth_h: float = 1.0
    depth_v: float = 0.1
    inter_crystal_phase: float = 0.0
    hwp_angle: float = np.pi / 4
    crystal_mismatch: float = 0.0

    def __post_init__(self):
        if not self.depth_h > self.depth_v >= 0:
            raise ValueError("sandwich needs depth_h > depth_v >= 0")


@dataclass(frozen=True)
class AbsorptionProfile:
    grid: FrequencyGrid
    comb_period_mhz: float
    tooth_fwhm_mhz: float
    peak_depth: float
    background_depth: float = 0.0
    bandwidth_mhz: float = 500.0
    tooth_shape: str = "gaussian"
    outside_depth: float | None = None
    edge_width_mhz: float = 5.0
    contrast: float = 1.0

    def __post_init__(self):
        if self.tooth_shape not in TOOTH_SHAPES:
            raise ValueError(f"unknown tooth shape {self.tooth_shape!r}")
        if self.peak_depth < 0 or self.background_depth < 0:
            raise ValueError("optical depths must be non-negative")
        if not self.finesse > 1:
            raise ValueError(f"comb finesse {self.finesse:.3g} must exceed 1")

    @property
    def finesse(self) -> float:
        return self.comb_period_mhz / self.tooth_fwhm_mhz

    @property
    def storage_time_ns(self) -> float:
        return 1e3 / self.comb_period_mhz

    @property
    def effective_depth(self) -> float:
        """Comb-averaged tooth depth (d-tilde), from the exact one-period mean."""
        return float(_tooth_fourier(self.tooth_shape, self.tooth_fwhm_mhz, self.comb_period_mhz, 0)) * self.peak_depth

    @cached_property
    def real_depth(self) -> np.ndarray:
        nu = self.grid.detunings / 1e6  # MHz
        teeth = self.peak_depth * _periodic_teeth(nu, self.comb_period_mhz, self.tooth_fwhm_mhz, self.tooth_shape)
        mean = self.effective_depth
        teeth = mean + self.contrast * (teeth - mean)
        half = self.bandwidth_mhz / 2
        w = max(self.edge_width_mhz, 1e-9)
        env = 0.5 * (np.tanh((nu + half) / w) - np.tanh((nu - half) / w))
        outside = self.background_depth if self.outside_depth is None else self.outside_depth
        return outside * (1 - env) + (self.background_depth + teeth) * env

    @cached_property
    def depth(self) -> np.ndarray:
        """Complex optical depth on ``grid`` (centred ordering)."""
        return causal_completion(self.real_depth)

    def band_mask(self) -> np.ndarray:
        return np.abs(self.grid.detunings) <= self.bandwidth_mhz * 1e6 / 2


def _periodic_teeth(nu_mhz, period, fwhm, shape):
    """Peak-1 teeth centred on multiples of ``period``."""
    u = nu_mhz - period * np.round(nu_mhz / period)
    if shape == "gaussian":
        s = fwhm * FWHM_TO_SIGMA
        reach = int(np.ceil(8 * s / period))
        out = np.zeros_like(u)
        for j in range(-reach, reach + 1):
            out += np.exp(-0.5 * ((u - j * period) / s) ** 2)
        return out
    if shape == "lorentzian":
        # closed-form periodised Lorentzian, normalised so an isolated tooth peaks at 1
        a = np.pi * fwhm / period
        return (a / 2) * np.sinh(a) / (np.cosh(a) - np.cos(2 * np.pi * u / period))
    if shape == "square":
        return (np.abs(u) <= fwhm / 2).astype(float)
    raise ValueError(shape)


def _tooth_fourier(shape, fwhm, period, n):
    """n-th cosine coefficient (per unit peak depth) of the periodic teeth.

    The comb average is n=0; the echo of order one is driven by n=1.
    """
    x = fwhm / period
    if shape == "gaussian":
        return x * GAUSSIAN_DEPTH_FACTOR * np.exp(-(np.pi**2) * x**2 * n**2 / (4 * np.log(2)))
    if shape == "lorentzian":
        return (np.pi * x / 2) * np.exp(-np.pi * x * n)
    if shape == "square":
        return x * (np.sinc(n * x) if n else 1.0)
    raise ValueError(shape)


def prepare_comb(
    pump: PumpSequenceSpec,
    material: MaterialSpec,
    grid: FrequencyGrid,
    peak_depth: float,
    tooth_fwhm_mhz: float | None = None,
    background_depth: float = 0.0,
    tooth_shape: str = "gaussian",
    outside_depth: float | None = None,
    edge_width_mhz: float = 5.0,
) -> AbsorptionProfile:
    """Comb burned by the pump sequence: teeth every ``Delta`` across ``sweep x (2*orders+1)``.

    Tooth width defaults to the material floor and is clamped to it (with a
    warning) when a narrower tooth is requested.
    """
    floor = material.min_tooth_fwhm_mhz
    if tooth_fwhm_mhz is None:
        if floor <= 0:
            raise ValueError("tooth width not given and material has no tooth-width floor")
        tooth_fwhm_mhz = floor
    elif tooth_fwhm_mhz < floor:
        warnings.warn(f"tooth width {tooth_fwhm_mhz} MHz clamped to material floor {floor} MHz", CombWarning, stacklevel=2)
        tooth_fwhm_mhz = floor
    if pump.bandwidth_mhz * 1e6 > grid.span:
        raise ValueError("comb bandwidth exceeds the grid span")
    if grid.df > tooth_fwhm_mhz * 1e6 / 10:
        warnings.warn("grid step is coarse compared with the comb teeth", CombWarning, stacklevel=2)
    return AbsorptionProfile(
        grid=grid,
        comb_period_mhz=pump.comb_period_mhz,
        tooth_fwhm_mhz=tooth_fwhm_mhz,
        peak_depth=peak_depth,
        background_depth=background_depth,
        bandwidth_mhz=pump.bandwidth_mhz,
        tooth_shape=tooth_shape,
        outside_depth=outside_depth,
        edge_width_mhz=edge_width_mhz,
    )


def profile_for_effective_depth(effective_depth: float, **kwargs) -> AbsorptionProfile:
    """Build a profile from d-tilde instead of peak depth (other fields as in the dataclass)."""
    shape = kwargs.get("tooth_shape", "gaussian")
    per_unit = _tooth_fourier(shape, kwargs["tooth_fwhm_mhz"], kwargs["comb_period_mhz"], 0)
    return AbsorptionProfile(peak_depth=effective_depth / per_unit, **kwargs)


def memory_transfer_function(profile: AbsorptionProfile) -> SpectralField:
    return SpectralField(profile.grid, np.exp(-profile.depth / 2))


def sandwich_transfer(profile: AbsorptionProfile, sandwich: SandwichSpec) -> np.ndarray:
    """Jones transfer matrices, shape (n_points, 2, 2), for the two-crystal sandwich."""
    total = sandwich.depth_h + sandwich.depth_v
    d = profile.depth
    fh, fv = sandwich.depth_h / total, sandwich.depth_v / total
    phase = np.exp(1j * sandwich.inter_crystal_phase)

    def crystal(scale):
        m = np.zeros((d.size, 2, 2), dtype=complex)
        m[:, 0, 0] = np.exp(-scale * fh * d / 2)
        m[:, 1, 1] = np.exp(-scale * fv * d / 2) * phase
        return m

    c1 = crystal(1.0)
    c2 = crystal(1.0 + sandwich.crystal_mismatch)
    mid = jones.waveplate("half", sandwich.hwp_angle)
    restore = jones.waveplate("half", np.pi / 4)
    return restore @ c2 @ mid @ c1


def store_retrieve(
    input_field: SpectralField,
    profile: AbsorptionProfile,
    sandwich: SandwichSpec | None = None,
    input_polarization: np.ndarray | None = None,
) -> np.ndarray:
    """Propagate a field through the memory and return the output time trace.

    Scalar path (no sandwich): array of shape (n,). Sandwich path: array of
    shape (2, n) holding the H and V components for ``input_polarization``.
    """
    if input_field.grid != profile.grid:
        raise ValueError("input field and profile use different grids")
    band = profile.band_mask()
    p = np.abs(input_field.amplitude) ** 2
    if p.sum() > 0 and p[~band].sum() / p.sum() > 0.01:
        warnings.warn("input spectrum extends beyond the comb band; that part is not stored", CombWarning, stacklevel=2)
    if sandwich is None:
        h = memory_transfer_function(profile)
        return to_time_domain(h * input_field)
    pol = jones.H if input_polarization is None else np.asarray(input_polarization, dtype=complex)
    m = sandwich_transfer(profile, sandwich)
    spec = (m @ pol) * input_field.amplitude[:, None]
    return np.vstack([to_time_domain(SpectralField(profile.grid, spec[:, k])) for k in range(2)])


def echo_window_energy(trace: np.ndarray, grid: FrequencyGrid, t0: float, delay: float, order: int = 1) -> float:
    """Energy of ``trace`` (any leading shape) within +/- delay/2 of ``t0 + order*delay`` (seconds)."""
    t = grid.times
    center = t0 + order * delay
    sel = np.abs(t - center) <= delay / 2
    return float(np.sum(np.abs(trace[..., sel]) ** 2))


def measure_efficiency(
    profile: AbsorptionProfile,
    pulse_fwhm_ns: float = 5.0,
    order: int = 1,
    sandwich: SandwichSpec | None = None,
    polarization: np.ndarray | None = None,
) -> float:
    """Echo energy of the given order over input energy, from Fourier propagation of a probe pulse."""
    delay = profile.storage_time_ns * 1e-9
    t0 = max(4 * pulse_fwhm_ns * 1e-9, 0.25 * delay)
    probe = gaussian_pulse(profile.grid, pulse_fwhm_ns * 1e-9, t0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CombWarning)
        out = store_retrieve(probe, profile, sandwich, polarization)
    return echo_window_energy(out, profile.grid, t0, delay, order) / probe.energy


def echo_peak_time(profile: AbsorptionProfile, pulse_fwhm_ns: float = 0.8, order: int = 1) -> float:
    """Delay (ns) of the output intensity maximum in (order - 1/2, order + 1/2) storage times after the probe."""
    delay = profile.storage_time_ns * 1e-9
    t0 = max(4 * pulse_fwhm_ns * 1e-9, 0.25 * delay)
    probe = gaussian_pulse(profile.grid, pulse_fwhm_ns * 1e-9, t0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CombWarning)
        out = np.abs(store_retrieve(probe, profile)) ** 2
    rel = profile.grid.times - t0
    sel = (rel > (order - 0.5) * delay) & (rel < (order + 0.5) * delay)
    return float(rel[sel][np.argmax(out[sel])] * 1e9)


def echo_efficiency_analytic(profile: AbsorptionProfile) -> float:
    """Closed-form forward-echo efficiency for Gaussian teeth.

    ``d~^2 exp(-d~) exp(-7/F^2) exp(-d0)`` with ``d~ = (d/F) sqrt(pi/(4 ln 2))``.
    """
    if profile.tooth_shape != "gaussian":
        raise NotImplementedError("closed form only for gaussian teeth; use measure_efficiency")
    f = profile.finesse
    dt = profile.peak_depth / f * GAUSSIAN_DEPTH_FACTOR * profile.contrast
    dmean = profile.peak_depth / f * GAUSSIAN_DEPTH_FACTOR
    return float(dt**2 * np.exp(-dmean) * np.exp(-7.0 / f**2) * np.exp(-profile.background_depth))


def periodic_comb_efficiency(
    effective_depth: float, finesse: float, tooth_shape: str = "gaussian", background_depth: float = 0.0, order: int = 1
) -> float:
    """Exact echo efficiency of an infinitely wide comb in the linear model.

    With cosine coefficients ``a_n`` of the comb, ``exp(-D/2)`` has first-order
    coefficient ``-a_1`` and second-order coefficient ``a_1^2/2 - a_2``, each
    times ``exp(-(d~ + d0)/2)``.
    """
    unit0 = _tooth_fourier(tooth_shape, 1.0, finesse, 0)
    d = effective_depth / unit0
    a1 = d * _tooth_fourier(tooth_shape, 1.0, finesse, 1)
    if order == 1:
        c = a1
    elif order == 2:
        c = a1**2 / 2 - d * _tooth_fourier(tooth_shape, 1.0, finesse, 2)
    else:
        raise ValueError("only orders 1 and 2 are supported")
    out = c**2 * np.exp(-np.asarray(effective_depth) - background_depth)
    return float(out) if np.ndim(out) == 0 else out


def comb_decay(profile: AbsorptionProfile, elapsed_ms: float, material: MaterialSpec) -> AbsorptionProfile:
    """Relax the comb contrast toward its flat mean with the auxiliary-state lifetime."""
    if elapsed_ms < 0:
        raise ValueError("elapsed time must be non-negative")
    return replace(profile, contrast=profile.contrast * float(np.exp(-elapsed_ms / material.aux_lifetime_ms)))
