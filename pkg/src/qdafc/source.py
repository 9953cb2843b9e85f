"""Quantum-dot single-photon source.

The dot is a pulsed emitter: excitation uniform within a square drive pulse,
radiative decay with lifetime ``tau``, a static per-photon detuning drawn from
the spectrally diffused line, and trion emission as an equal incoherent
mixture of sigma+/sigma-.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from . import jones
from .rng import stream
from .spectral import FWHM_TO_SIGMA

HEATING_LASERS = ("910nm", "1550nm")


def _default_heating():
    return {
        "910nm": ((0.0, 879.5), (24.0, 879.7)),
        "1550nm": ((0.0, 879.5), (300.0, 879.7)),
    }


@dataclass(frozen=True)
class EmitterSpec:
    lifetime_ns: float = 0.849
    intrinsic_center_nm: float = 879.5
    diffusion_fwhm_ghz: float = 25.0
    power_law_slope: float = 1.235
    cw_count_rate: float = 5e5
    polarization_weights: tuple[float, float] = (1.0, 0.801)
    heating_calibration: dict = field(default_factory=_default_heating)

    def __post_init__(self):
        if not self.lifetime_ns > 0:
            raise ValueError("lifetime must be positive")
        if self.diffusion_fwhm_ghz * 1e9 < natural_linewidth(self):
            raise ValueError("diffused linewidth cannot be below the natural linewidth")
        if not self.power_law_slope > 0:
            raise ValueError("power-law slope must be positive")
        if min(self.polarization_weights) < 0:
            raise ValueError("polarization weights must be non-negative")
        for laser, anchors in self.heating_calibration.items():
            a = np.asarray(anchors, dtype=float)
            if a.ndim != 2 or a.shape[1] != 2:
                raise ValueError(f"heating anchors for {laser} must be (power, wavelength) pairs")
            order = np.argsort(a[:, 0])
            if np.any(np.diff(a[order, 1]) < 0):
                raise ValueError(f"heating calibration for {laser} must red-shift monotonically")


@dataclass(frozen=True)
class ExcitationPulseSpec:
    pulse_width_ns: float = 0.8
    period_ns: float = 400.0
    n_modes: int = 1
    mode_separation_ns: float = 0.0
    excitation_probability: float = 1.0

    def __post_init__(self):
        if not self.pulse_width_ns > 0 or not self.period_ns > 0:
            raise ValueError("pulse width and period must be positive")
        if self.n_modes < 1:
            raise ValueError("n_modes must be >= 1")
        if not 0.0 <= self.excitation_probability <= 1.0:
            raise ValueError("excitation probability must be in [0, 1]")
        if self.n_modes > 1 and self.mode_separation_ns < self.pulse_width_ns:
            raise ValueError("modes overlap: separation below the pulse width")
        if self.n_modes * max(self.mode_separation_ns, self.pulse_width_ns) > self.period_ns:
            raise ValueError("pulse train does not fit in one period")

    def is_deterministic(self, spec: EmitterSpec) -> bool:
        """Drive pulse shorter than the lifetime: at most one photon per pulse."""
        return self.pulse_width_ns < spec.lifetime_ns


@dataclass(frozen=True)
class PhotonRecord:
    time_ns: float
    trial: int
    mode: int
    jones: np.ndarray
    detuning_ghz: float


@dataclass(frozen=True)
class PhotonStream:
    """Struct-of-arrays photon list; iterate to get :class:`PhotonRecord` objects."""

    time_ns: np.ndarray
    excitation_ns: np.ndarray
    trial: np.ndarray
    mode: np.ndarray
    detuning_ghz: np.ndarray
    sigma_plus: np.ndarray  # bool; False means sigma-

    def __len__(self) -> int:
        return int(self.time_ns.size)

    @property
    def jones(self) -> np.ndarray:
        return np.where(self.sigma_plus[:, None], jones.SIGMA_PLUS, jones.SIGMA_MINUS)

    def __iter__(self) -> Iterator[PhotonRecord]:
        for i in range(len(self)):
            pol = jones.SIGMA_PLUS if self.sigma_plus[i] else jones.SIGMA_MINUS
            yield PhotonRecord(
                float(self.time_ns[i]), int(self.trial[i]), int(self.mode[i]), pol, float(self.detuning_ghz[i])
            )

    @classmethod
    def empty(cls) -> "PhotonStream":
        z = np.zeros(0)
        zi = np.zeros(0, dtype=np.int64)
        return cls(z, z, zi, zi, z, np.zeros(0, dtype=bool))


def natural_linewidth(spec: EmitterSpec) -> float:
    """Transform-limited linewidth 1/(2 pi tau) in Hz."""
    return 1.0 / (2.0 * np.pi * spec.lifetime_ns * 1e-9)


def emission_wavelength(heating_power_mw: float, which_laser: str, spec: EmitterSpec) -> float:
    """Emission wavelength (nm) under local heating, piecewise-linear through anchors."""
    if heating_power_mw < 0:
        raise ValueError("heating power must be non-negative")
    if which_laser not in spec.heating_calibration:
        raise ValueError(f"no heating calibration for laser {which_laser!r}")
    a = np.asarray(spec.heating_calibration[which_laser], dtype=float)
    a = a[np.argsort(a[:, 0])]
    if len(a) < 2:
        raise ValueError("heating calibration needs at least two anchors")
    p, lam = a[:, 0], a[:, 1]
    if heating_power_mw <= p[-1]:
        out = float(np.interp(heating_power_mw, p, lam))
    else:
        slope = (lam[-1] - lam[-2]) / (p[-1] - p[-2])
        out = float(lam[-1] + slope * (heating_power_mw - p[-1]))
    return max(out, spec.intrinsic_center_nm)


def heating_power_for(target_nm: float, which_laser: str, spec: EmitterSpec) -> float:
    """Inverse of :func:`emission_wavelength` on the calibrated range."""
    a = np.asarray(spec.heating_calibration[which_laser], dtype=float)
    a = a[np.argsort(a[:, 0])]
    if not a[0, 1] <= target_nm <= a[-1, 1]:
        raise ValueError(f"{target_nm} nm outside calibrated tuning range")
    return float(np.interp(target_nm, a[:, 1], a[:, 0]))


def relative_intensity(excitation_power_mw: float, reference_power_mw: float, spec: EmitterSpec) -> float:
    if excitation_power_mw <= 0 or reference_power_mw <= 0:
        raise ValueError("powers must be positive")
    return float((excitation_power_mw / reference_power_mw) ** spec.power_law_slope)


def polarized_detection_intensity(
    polarizer_angle: float, qwp_present: bool, qwp_offset: float, spec: EmitterSpec
) -> float:
    """Polariser-resolved intensity of the sigma+/sigma- mixture.

    Without a QWP the mixture is unpolarised in the linear basis and the result
    is the mean of the two weights; with a QWP the analyser chain maps the two
    circular components onto orthogonal linear axes whose weights are
    ``polarization_weights``.
    """
    a1, a2 = spec.polarization_weights
    if not qwp_present:
        return 0.5 * (a1 + a2)
    x = polarizer_angle - qwp_offset
    return float(a1 * np.cos(x) ** 2 + a2 * np.sin(x) ** 2)


def emit_train(
    pulses: ExcitationPulseSpec,
    spec: EmitterSpec,
    n_trials: int,
    seed=None,
) -> PhotonStream:
    """Photons emitted over ``n_trials`` periods, each carrying ``pulses.n_modes`` drive pulses.

    Drive pulses shorter than the lifetime give at most one photon each. Longer
    pulses allow re-excitation after each emission while the drive is still on.
    """
    rng = stream(seed, "source.emit_train")
    n_pulses = int(n_trials) * pulses.n_modes
    p = pulses.excitation_probability
    if n_pulses == 0 or p == 0:
        return PhotonStream.empty()

    tau = spec.lifetime_ns
    width = pulses.pulse_width_ns
    excited = rng.random(n_pulses) < p
    idx = np.flatnonzero(excited)
    pulse_start = (idx // pulses.n_modes) * pulses.period_ns + (idx % pulses.n_modes) * pulses.mode_separation_ns
    exc = pulse_start + rng.random(idx.size) * width
    emit = exc + rng.exponential(tau, idx.size)
    chunks_exc = [exc]
    chunks_emit = [emit]
    chunks_idx = [idx]

    if not pulses.is_deterministic(spec) and p < 1.0:
        # constant pump rate giving P(at least one excitation) = p over the pulse
        rate = -np.log1p(-p) / width
        last_emit, last_idx, last_start = emit, idx, pulse_start
        while last_idx.size:
            nxt = last_emit + rng.exponential(1.0 / rate, last_idx.size)
            keep = nxt < last_start + width
            last_idx, last_start = last_idx[keep], last_start[keep]
            exc2 = nxt[keep]
            last_emit = exc2 + rng.exponential(tau, exc2.size)
            chunks_exc.append(exc2)
            chunks_emit.append(last_emit)
            chunks_idx.append(last_idx)

    exc = np.concatenate(chunks_exc)
    emit = np.concatenate(chunks_emit)
    idx = np.concatenate(chunks_idx)
    order = np.argsort(emit, kind="stable")
    exc, emit, idx = exc[order], emit[order], idx[order]
    n = emit.size
    detuning = rng.normal(0.0, spec.diffusion_fwhm_ghz * FWHM_TO_SIGMA, n)
    sigma_plus = rng.random(n) < 0.5
    return PhotonStream(
        time_ns=emit,
        excitation_ns=exc,
        trial=idx // pulses.n_modes,
        mode=idx % pulses.n_modes,
        detuning_ghz=detuning,
        sigma_plus=sigma_plus,
    )


def emit_poisson_train(
    pulses: ExcitationPulseSpec,
    spec: EmitterSpec,
    n_trials: int,
    mean_per_pulse: float,
    seed=None,
    name: str = "source.emit_poisson_train",
) -> PhotonStream:
    """Poisson-distributed photon numbers per drive pulse with the same timing law.

    Models an attenuated coherent source, or pulse-synchronous background light.
    """
    if mean_per_pulse < 0:
        raise ValueError("mean photon number must be non-negative")
    rng = stream(seed, name)
    n_pulses = int(n_trials) * pulses.n_modes
    counts = rng.poisson(mean_per_pulse, n_pulses)
    idx = np.repeat(np.arange(n_pulses), counts)
    if idx.size == 0:
        return PhotonStream.empty()
    start = (idx // pulses.n_modes) * pulses.period_ns + (idx % pulses.n_modes) * pulses.mode_separation_ns
    exc = start + rng.random(idx.size) * pulses.pulse_width_ns
    emit = exc + rng.exponential(spec.lifetime_ns, idx.size)
    order = np.argsort(emit, kind="stable")
    exc, emit, idx = exc[order], emit[order], idx[order]
    return PhotonStream(
        time_ns=emit,
        excitation_ns=exc,
        trial=idx // pulses.n_modes,
        mode=idx % pulses.n_modes,
        detuning_ghz=rng.normal(0.0, spec.diffusion_fwhm_ghz * FWHM_TO_SIGMA, idx.size),
        sigma_plus=rng.random(idx.size) < 0.5,
    )


def merge_streams(*streams: PhotonStream) -> PhotonStream:
    """Time-ordered union of photon streams."""
    parts = [s for s in streams if len(s)]
    if not parts:
        return PhotonStream.empty()
    cat = {k: np.concatenate([getattr(s, k) for s in parts]) for k in
           ("time_ns", "excitation_ns", "trial", "mode", "detuning_ghz", "sigma_plus")}
    order = np.argsort(cat["time_ns"], kind="stable")
    return PhotonStream(**{k: v[order] for k, v in cat.items()})
