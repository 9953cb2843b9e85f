import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qdafc.optics import (
    BackgroundSpec,
    BandpassFilter,
    CavitySpec,
    EtalonSpec,
    FiberLink,
    background_leakage_rate,
    detuning_ghz_to_nm,
    etalon_transfer,
    filter_chain_transfer,
    gaussian_line_density,
    nm_to_detuning_ghz,
)
from qdafc.spectral import FrequencyGrid, SpectralField, fwhm_of_samples, impulse_response

E1 = EtalonSpec()
E2 = EtalonSpec(fsr_ghz=300.0, bandwidth_ghz=8.0)
detunings = st.floats(-5000, 5000, allow_nan=False)


def airy(d, e):
    k = (2 * e.finesse / np.pi) ** 2
    return e.peak_transmission / (1 + k * np.sin(np.pi * (d - e.lock_detuning_ghz) / e.fsr_ghz) ** 2)


def test_etalon_peak_and_half_width():
    assert abs(etalon_transfer(0.0, E1)) ** 2 == pytest.approx(0.95)
    assert abs(etalon_transfer(0.35, E1)) ** 2 == pytest.approx(0.95 / 2, rel=0.01)


@given(detunings)
def test_etalon_matches_airy_and_is_periodic(d):
    assert abs(etalon_transfer(d, E1)) ** 2 == pytest.approx(airy(d, E1), rel=1e-9, abs=1e-15)
    assert etalon_transfer(d + 3 * E1.fsr_ghz, E1) == pytest.approx(etalon_transfer(d, E1), rel=1e-9, abs=1e-12)


def test_etalon_lock_offset_moves_peak():
    e = EtalonSpec(lock_detuning_ghz=1.5)
    assert abs(etalon_transfer(1.5, e)) ** 2 == pytest.approx(0.95)


def test_etalon_validation():
    with pytest.raises(ValueError):
        EtalonSpec(bandwidth_ghz=60.0)
    with pytest.raises(ValueError):
        EtalonSpec(peak_transmission=0.0)


def test_etalon_is_causal():
    g = FrequencyGrid(3.4e14, 400e9, 2**14)
    h = impulse_response(SpectralField(g, etalon_transfer(g.detunings / 1e9, E1)))
    neg = g.signed_times < 0
    assert np.sum(np.abs(h[neg]) ** 2) < 1e-6 * np.sum(np.abs(h) ** 2)


def test_cavity_q():
    c = CavitySpec(880.0, 3.0)
    assert c.q_factor == pytest.approx(293.3, abs=0.1)
    assert abs(c.transfer(float(nm_to_detuning_ghz(880.0)))) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        CavitySpec(880.0, 0.0)


def test_wavelength_detuning_round_trip():
    assert nm_to_detuning_ghz(879.7) == pytest.approx(0.0)
    assert detuning_ghz_to_nm(nm_to_detuning_ghz(860.0)) == pytest.approx(860.0)
    # shorter wavelength is higher frequency
    assert nm_to_detuning_ghz(860.0) > 0


def test_bandpass():
    b = BandpassFilter(879.7, 20.0, 0.99, 1e-7)
    assert abs(b.transfer(0.0)) ** 2 == pytest.approx(0.99)
    assert abs(b.transfer(nm_to_detuning_ghz(900.0))) ** 2 == pytest.approx(1e-7)


def test_chain_identity_and_bound():
    d = np.linspace(-200, 200, 4001)
    np.testing.assert_allclose(filter_chain_transfer(d, [FiberLink()]), 1.0)
    elems = [E1, E2, CavitySpec(), BandpassFilter()]
    out = np.abs(filter_chain_transfer(d, elems))
    each = np.min([np.abs(e.transfer(d)) for e in elems], axis=0)
    assert np.all(out <= each + 1e-15)
    with pytest.raises(ValueError):
        filter_chain_transfer(d, [])


@given(st.permutations([E1, E2, CavitySpec(), FiberLink(0.5)]))
def test_chain_order_independent(elems):
    d = np.linspace(-100, 100, 101)
    ref = filter_chain_transfer(d, [E1, E2, CavitySpec(), FiberLink(0.5)])
    np.testing.assert_allclose(filter_chain_transfer(d, list(elems)), ref, rtol=1e-12)


@given(detunings)
def test_passive(d):
    for e in (E1, E2, CavitySpec(), BandpassFilter(), FiberLink(0.9)):
        assert abs(e.transfer(d)) <= 1.0 + 1e-12


def test_two_etalons_leak_less_than_product():
    d = np.linspace(-600, 600, 240001)
    both = np.abs(filter_chain_transfer(d, [E1, E2])) ** 2
    prod = (np.abs(E1.transfer(d)) ** 2) * (np.abs(E2.transfer(d)) ** 2)
    np.testing.assert_allclose(both, prod, rtol=1e-9)
    off = np.abs(d) > 10
    assert np.all(both[off] <= np.abs(E1.transfer(d[off])) ** 2)


def test_chain_narrows_diffused_line_to_700_mhz():
    d = np.linspace(-5, 5, 200001)
    out = gaussian_line_density(d, 25.0) * np.abs(filter_chain_transfer(d, [E1])) ** 2
    assert fwhm_of_samples(d, out) == pytest.approx(0.7, rel=0.02)


def brute_force_leak(b, chain, lo, hi, step=0.005):
    d = np.arange(lo, hi, step) + step / 2
    return float(np.sum(b.density(d) * np.abs(filter_chain_transfer(d, chain)) ** 2) * step)


def test_leakage_zero_density():
    assert background_leakage_rate(BackgroundSpec(relative_power_density=0.0), [E1]) == 0.0
    with pytest.raises(ValueError):
        background_leakage_rate(BackgroundSpec(relative_power_density=1.0), [CavitySpec()])


def test_leakage_flat_background_single_etalon():
    b = BackgroundSpec(relative_power_density=1e-3, shape="flat")
    band = (-5000.0 - 25.0, 5000.0 + 25.0)  # edges halfway between peaks
    closed = background_leakage_rate(b, [E1], band=band)
    brute = brute_force_leak(b, [E1], *band)
    assert closed == pytest.approx(brute, rel=1e-3)
    n_peaks = 201
    assert closed == pytest.approx(n_peaks * 1e-3 * E1.peak_integral_ghz)


def test_second_etalon_reduces_leakage_by_brute_force_factor():
    b = BackgroundSpec(relative_power_density=1e-3, shape="flat")
    band = (-3000.0 - 25.0, 3000.0 + 25.0)
    one = background_leakage_rate(b, [E1], band=band)
    two = background_leakage_rate(b, [E1, E2], band=band)
    assert two < one
    assert two == pytest.approx(brute_force_leak(b, [E1, E2], *band, step=0.002), rel=1e-3)
    # the 300 GHz etalon passes every sixth 50 GHz peak; wings add a little on top
    assert 1 / 6 * 0.95 * 0.9 < two / one < 0.2


def test_leakage_excluding_central_cell():
    b = BackgroundSpec(relative_power_density=1e-3, shape="flat")
    band = (-525.0, 525.0)
    full = background_leakage_rate(b, [E1], band=band)
    rest = background_leakage_rate(b, [E1], band=band, exclude_central=True)
    assert full - rest == pytest.approx(1e-3 * E1.peak_integral_ghz, rel=1e-6)


def test_leakage_grows_with_wetting_width():
    narrow = BackgroundSpec(relative_power_density=1e-2, wetting_fwhm_nm=10.0)
    wide = BackgroundSpec(relative_power_density=1e-2, wetting_fwhm_nm=30.0)
    assert background_leakage_rate(wide, [E1]) > background_leakage_rate(narrow, [E1])


def test_background_validation():
    with pytest.raises(ValueError):
        BackgroundSpec(relative_power_density=-1.0)
    with pytest.raises(ValueError):
        BackgroundSpec(shape="lorentzian")


def test_line_density_normalised():
    d = np.linspace(-200, 200, 400001)
    assert np.sum(gaussian_line_density(d, 25.0)) * (d[1] - d[0]) == pytest.approx(1.0, rel=1e-9)
