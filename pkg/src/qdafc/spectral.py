"""Frequency grids, complex spectra, line shapes and the Fourier-transform contract.

All spectra live on a complex-baseband grid centred on the memory line, so the
``detunings`` axis is relative to ``center_frequency``. Frequencies are in Hz and
times in seconds throughout this module.

Transform convention: a time trace is ``e(t_k) = N^-1/2 sum_m E(nu_m) exp(+2 pi i nu_m t_k)``
(unitary DFT), so a causal response ``h(t)`` has transfer function
``H(nu) = sum_k h(t_k) exp(-2 pi i nu t_k)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

C_LIGHT = 299_792_458.0  # m/s
PLANCK_EV = 4.135667696e-15  # eV s

FWHM_TO_SIGMA = 1.0 / (2.0 * np.sqrt(2.0 * np.log(2.0)))


class OutOfBandError(ValueError):
    """A requested frequency lies outside the grid span."""


class UnderResolvedWarning(UserWarning):
    """A spectral feature is narrower than two grid steps."""


@dataclass(frozen=True)
class FrequencyGrid:
    center_frequency: float  # Hz, absolute optical carrier (bookkeeping only)
    span: float  # Hz
    n_points: int

    def __post_init__(self):
        if int(self.n_points) != self.n_points or self.n_points < 2:
            raise ValueError(f"n_points must be an integer >= 2, got {self.n_points}")
        if not self.span > 0:
            raise ValueError(f"span must be positive, got {self.span}")

    @classmethod
    def around_wavelength(cls, wavelength_nm: float, span: float, n_points: int) -> "FrequencyGrid":
        return cls(C_LIGHT / (wavelength_nm * 1e-9), span, n_points)

    @property
    def df(self) -> float:
        return self.span / self.n_points

    @property
    def dt(self) -> float:
        return 1.0 / self.span

    @property
    def time_window(self) -> float:
        return self.n_points / self.span

    @property
    def detunings(self) -> np.ndarray:
        """Baseband frequency axis; index ``n_points // 2`` is zero detuning."""
        n = self.n_points
        return (np.arange(n) - n // 2) * self.df

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_points) * self.dt

    @property
    def signed_times(self) -> np.ndarray:
        """Time axis with the upper half of the window mapped to negative times."""
        k = np.arange(self.n_points)
        k = np.where(k < (self.n_points + 1) // 2, k, k - self.n_points)
        return k * self.dt

    def contains(self, detuning: float) -> bool:
        d = self.detunings
        return bool(d[0] <= detuning <= d[-1])


def memory_grid(span: float = 4e9, n_points: int = 2**20, wavelength_nm: float = 879.7) -> FrequencyGrid:
    """Default grid for memory simulations: 4 GHz around the 879.7 nm line."""
    return FrequencyGrid.around_wavelength(wavelength_nm, span, n_points)


@dataclass(frozen=True)
class SpectralField:
    grid: FrequencyGrid
    amplitude: np.ndarray

    def __post_init__(self):
        amp = np.asarray(self.amplitude, dtype=complex)
        if amp.shape != (self.grid.n_points,):
            raise ValueError(f"amplitude shape {amp.shape} does not match grid of {self.grid.n_points} points")
        if not np.all(np.isfinite(amp)):
            raise ValueError("amplitude contains non-finite values")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitude", amp)

    @property
    def energy(self) -> float:
        return float(np.sum(np.abs(self.amplitude) ** 2))

    def __mul__(self, other):
        if isinstance(other, SpectralField):
            if other.grid != self.grid:
                raise ValueError("fields live on different grids")
            other = other.amplitude
        return SpectralField(self.grid, self.amplitude * other)

    __rmul__ = __mul__


def to_time_domain(field: SpectralField) -> np.ndarray:
    """Unitary inverse DFT; the returned trace is sampled at ``field.grid.times``."""
    return np.fft.ifft(np.fft.ifftshift(field.amplitude), norm="ortho")


def to_frequency_domain(trace: np.ndarray, grid: FrequencyGrid) -> SpectralField:
    trace = np.asarray(trace, dtype=complex)
    if trace.shape != (grid.n_points,):
        raise ValueError("trace length does not match grid")
    return SpectralField(grid, np.fft.fftshift(np.fft.fft(trace, norm="ortho")))


def impulse_response(transfer: SpectralField) -> np.ndarray:
    """Physical impulse response (units 1/s) of a transfer function on its grid."""
    return np.fft.ifft(np.fft.ifftshift(transfer.amplitude)) * transfer.grid.span


def line_shape(kind: str, center: float, fwhm: float, grid: FrequencyGrid) -> SpectralField:
    """Peak-normalised real line shape; ``center`` is a detuning in Hz."""
    if not fwhm > 0:
        raise ValueError(f"fwhm must be positive, got {fwhm}")
    if not grid.contains(center):
        raise OutOfBandError(f"center {center:g} Hz outside grid span +/-{grid.span / 2:g} Hz")
    if fwhm < 2 * grid.df:
        warnings.warn(
            f"line fwhm {fwhm:g} Hz is below two grid steps ({2 * grid.df:g} Hz)",
            UnderResolvedWarning,
            stacklevel=2,
        )
    x = grid.detunings - center
    if kind == "lorentzian":
        prof = 1.0 / (1.0 + (2.0 * x / fwhm) ** 2)
    elif kind == "gaussian":
        prof = np.exp(-4.0 * np.log(2.0) * (x / fwhm) ** 2)
    else:
        raise ValueError(f"unknown line shape {kind!r}")
    return SpectralField(grid, prof.astype(complex))


def gaussian_pulse(grid: FrequencyGrid, fwhm_time: float, t0: float, center: float = 0.0) -> SpectralField:
    """Transform-limited Gaussian pulse whose intensity FWHM is ``fwhm_time`` (s), centred at ``t0``."""
    t = grid.signed_times
    sigma_amp = fwhm_time * FWHM_TO_SIGMA * np.sqrt(2.0)
    # build on a wrapped time axis so pulses near t=0 stay contiguous
    tt = np.mod(t - t0 + grid.time_window / 2, grid.time_window) - grid.time_window / 2
    env = np.exp(-(tt**2) / (2 * sigma_amp**2)) * np.exp(2j * np.pi * center * grid.times)
    env = env / np.sqrt(np.sum(np.abs(env) ** 2))
    return to_frequency_domain(env, grid)


def causal_completion(real_part: np.ndarray) -> np.ndarray:
    """Return ``real_part + i*imag`` whose time-domain kernel vanishes at negative times.

    The imaginary part is the discrete Hilbert (Kramers-Kronig) partner of the
    real part on the periodic grid. Input and output use the centred
    (``detunings``) ordering.
    """
    re = np.asarray(real_part, dtype=float)
    n = re.size
    kernel = np.fft.ifft(np.fft.ifftshift(re))
    w = np.zeros(n)
    w[0] = 1.0
    w[1 : (n + 1) // 2] = 2.0
    if n % 2 == 0:
        w[n // 2] = 1.0
    # keep the given real part exactly; only the partner comes from the transform
    return re + 1j * np.fft.fftshift(np.fft.fft(kernel * w)).imag


def fwhm_of_samples(x: np.ndarray, y: np.ndarray) -> float:
    """Full width at half maximum of a single-peaked sampled curve, with linear interpolation."""
    y = np.asarray(y, dtype=float)
    i = int(np.argmax(y))
    half = y[i] / 2.0
    lo = i
    while lo > 0 and y[lo] > half:
        lo -= 1
    hi = i
    while hi < y.size - 1 and y[hi] > half:
        hi += 1
    if y[lo] > half or y[hi] > half:
        raise ValueError("curve does not fall to half maximum inside the sampled range")
    xl = np.interp(half, [y[lo], y[lo + 1]], [x[lo], x[lo + 1]])
    xr = np.interp(half, [y[hi], y[hi - 1]], [x[hi], x[hi - 1]])
    return float(xr - xl)
