import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from qdafc.spectral import (
    FrequencyGrid,
    OutOfBandError,
    SpectralField,
    UnderResolvedWarning,
    causal_completion,
    fwhm_of_samples,
    gaussian_pulse,
    impulse_response,
    line_shape,
    memory_grid,
    to_frequency_domain,
    to_time_domain,
)


@pytest.fixture
def grid():
    return memory_grid(span=4e9, n_points=2**14)


def test_grid_resolutions(grid):
    assert grid.dt == pytest.approx(1 / 4e9)
    assert grid.df == pytest.approx(4e9 / 2**14)
    assert grid.time_window == pytest.approx(2**14 / 4e9)
    assert grid.detunings[grid.n_points // 2] == 0.0
    np.testing.assert_allclose(np.diff(grid.detunings), grid.df)


def test_default_memory_grid_matches_design():
    g = memory_grid()
    assert g.n_points == 2**20 and g.span == 4e9
    assert g.time_window == pytest.approx(262.144e-6)
    assert g.dt == pytest.approx(0.25e-9)


@pytest.mark.parametrize("kwargs", [dict(span=0.0, n_points=16), dict(span=1e9, n_points=1), dict(span=-1.0, n_points=8)])
def test_grid_rejects_bad_parameters(kwargs):
    with pytest.raises(ValueError):
        FrequencyGrid(3.4e14, **kwargs)


def test_lorentzian_peak_and_half_width(grid):
    f = 700e6
    ls = line_shape("lorentzian", 0.0, f, grid)
    i0 = grid.n_points // 2
    assert ls.amplitude[i0].real == pytest.approx(1.0)
    half = np.interp(f / 2, grid.detunings, ls.amplitude.real)
    assert half == pytest.approx(0.5, abs=1e-3)


def test_gaussian_to_lorentzian_area_ratio():
    # quadrature oracle on an analytic integrand rather than the grid
    f = 700e6
    s = 1 / (2 * np.sqrt(2 * np.log(2)))  # in units of the fwhm
    g_area = integrate.quad(lambda u: np.exp(-0.5 * (u / s) ** 2), -np.inf, np.inf)[0]
    l_area = integrate.quad(lambda u: 1 / (1 + (2 * u) ** 2), -np.inf, np.inf)[0]
    fine = memory_grid(span=2e12, n_points=2**22)
    g = line_shape("gaussian", 0.0, f, fine).amplitude.real.sum() * fine.df
    lz = line_shape("lorentzian", 0.0, f, fine).amplitude.real.sum() * fine.df
    assert g_area / l_area == pytest.approx(0.678, abs=1e-3)
    assert g / lz == pytest.approx(g_area / l_area, rel=2e-3)


def test_line_shape_errors(grid):
    with pytest.raises(OutOfBandError):
        line_shape("gaussian", 3e9, 1e8, grid)
    with pytest.raises(ValueError):
        line_shape("gaussian", 0.0, 0.0, grid)
    with pytest.raises(ValueError):
        line_shape("voigt", 0.0, 1e8, grid)
    with pytest.warns(UnderResolvedWarning):
        line_shape("gaussian", 0.0, grid.df, grid)


def test_line_shape_symmetric(grid):
    a = line_shape("lorentzian", 0.0, 3e8, grid).amplitude.real
    # symmetric about index n/2 on the even grid
    assert np.array_equal(a[1:], a[1:][::-1])


def test_gaussian_transform_limit(grid):
    fwhm_nu = 500e6
    spec = line_shape("gaussian", 0.0, fwhm_nu, grid)
    trace = np.abs(np.fft.fftshift(to_time_domain(spec)))
    t = (np.arange(grid.n_points) - grid.n_points // 2) * grid.dt
    expected = 4 * np.log(2) / (np.pi * fwhm_nu)
    assert fwhm_of_samples(t, trace) == pytest.approx(expected, rel=5e-3)


def test_gaussian_pulse_has_requested_width(grid):
    p = gaussian_pulse(grid, 2e-9, 100e-9)
    i = np.abs(to_time_domain(p)) ** 2
    assert fwhm_of_samples(grid.times, i) == pytest.approx(2e-9, rel=1e-2)
    assert grid.times[np.argmax(i)] == pytest.approx(100e-9, abs=grid.dt)
    assert p.energy == pytest.approx(1.0)


@given(st.integers(0, 2**32 - 1))
def test_round_trip_and_parseval(seed):
    g = FrequencyGrid(3.4e14, 1e9, 256)
    rng = np.random.default_rng(seed)
    amp = rng.normal(size=256) + 1j * rng.normal(size=256)
    f = SpectralField(g, amp)
    t = to_time_domain(f)
    back = to_frequency_domain(t, g)
    np.testing.assert_allclose(back.amplitude, amp, atol=1e-12 * np.abs(amp).max())
    assert np.sum(np.abs(t) ** 2) == pytest.approx(f.energy, rel=1e-10)


def test_spectral_field_validation():
    g = FrequencyGrid(3.4e14, 1e9, 8)
    with pytest.raises(ValueError):
        SpectralField(g, np.ones(7))
    with pytest.raises(ValueError):
        SpectralField(g, np.array([np.nan] + [0] * 7))
    f = SpectralField(g, np.ones(8))
    with pytest.raises(ValueError):
        f.amplitude[0] = 2
    with pytest.raises(ValueError):
        f * SpectralField(FrequencyGrid(3.4e14, 2e9, 8), np.ones(8))


def test_impulse_response_of_unity_is_delta():
    g = FrequencyGrid(3.4e14, 1e9, 64)
    h = impulse_response(SpectralField(g, np.ones(64)))
    assert h[0] == pytest.approx(g.span)
    assert np.allclose(h[1:], 0)


@given(st.integers(0, 2**32 - 1))
def test_causal_completion_is_causal(seed):
    rng = np.random.default_rng(seed)
    n = 512
    # real part of a causal kernel's spectrum
    k = np.zeros(n)
    k[: n // 4] = rng.normal(size=n // 4)
    re = np.fft.fftshift(np.fft.fft(k)).real
    full = causal_completion(re)
    kern = np.fft.ifft(np.fft.ifftshift(full))
    assert np.allclose(full.real, re)
    assert np.max(np.abs(kern[n // 2 + 1:])) < 1e-10 * np.max(np.abs(kern))
    np.testing.assert_allclose(kern[: n // 4].real, k[: n // 4], atol=1e-10)


def test_fwhm_of_samples_errors():
    x = np.linspace(-1, 1, 11)
    with pytest.raises(ValueError):
        fwhm_of_samples(x, np.ones(11))
