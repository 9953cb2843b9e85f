"""Fits and estimators applied to simulated or imported histograms.

Curve fits use Levenberg-Marquardt with analytic Jacobians and Poisson
weights ``sigma = sqrt(max(counts, 1))``; parameter covariance is the inverse
of ``J^T J`` of the weighted problem.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, signal, stats

from .detection import Histogram, window_counts
from .spectral import C_LIGHT, FWHM_TO_SIGMA, PLANCK_EV

SIGMA_TO_FWHM = 1.0 / FWHM_TO_SIGMA


@dataclass(frozen=True)
class FitResult:
    model_name: str
    params: dict
    uncertainties: dict
    residual_norm: float
    converged: bool
    extra: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.params[key]

    def to_dict(self) -> dict:
        return {
            "model_name": self.model_name,
            "params": self.params,
            "uncertainties": self.uncertainties,
            "residual_norm": self.residual_norm,
            "converged": self.converged,
            "extra": self.extra,
        }


# model functions: f(p, x) and analytic jacobian j(p, x) with shape (len(x), len(p))

def exponential(p, t):
    a, tau, c = p
    return a * np.exp(-t / tau) + c


def exponential_jac(p, t):
    a, tau, c = p
    e = np.exp(-t / tau)
    return np.column_stack([e, a * e * t / tau**2, np.ones_like(t)])


def gaussian(p, x):
    a, mu, s, c = p
    return a * np.exp(-0.5 * ((x - mu) / s) ** 2) + c


def gaussian_jac(p, x):
    a, mu, s, c = p
    u = (x - mu) / s
    g = np.exp(-0.5 * u**2)
    return np.column_stack([g, a * g * u / s, a * g * u**2 / s, np.ones_like(x)])


def lorentzian(p, x):
    a, x0, w, c = p
    return a / (1 + (2 * (x - x0) / w) ** 2) + c


def lorentzian_jac(p, x):
    a, x0, w, c = p
    u = 2 * (x - x0) / w
    den = 1 + u**2
    return np.column_stack([1 / den, a * 4 * u / (w * den**2), a * 2 * u**2 / (w * den**2), np.ones_like(x)])


MODELS = {
    "exponential": (exponential, exponential_jac),
    "gaussian": (gaussian, gaussian_jac),
    "lorentzian": (lorentzian, lorentzian_jac),
}


def _weighted_fit(name, x, y, p0, sigma=None):
    f, jac = MODELS[name]
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = 1.0 / (np.sqrt(np.maximum(y, 1.0)) if sigma is None else np.asarray(sigma, dtype=float))
    try:
        sol = optimize.least_squares(
            lambda p: (f(p, x) - y) * w,
            p0,
            jac=lambda p: jac(p, x) * w[:, None],
            method="lm",
            xtol=1e-15,
            ftol=1e-15,
            gtol=1e-15,
            max_nfev=20000,
        )
    except (ValueError, FloatingPointError):
        return np.asarray(p0, dtype=float), np.full((len(p0), len(p0)), np.inf), np.inf, False
    jw = sol.jac
    with np.errstate(all="ignore"):
        try:
            cov = np.linalg.inv(jw.T @ jw)
        except np.linalg.LinAlgError:
            cov = np.full((len(p0), len(p0)), np.inf)
    ok = bool(sol.success) and np.all(np.isfinite(sol.x)) and np.all(np.isfinite(np.diag(cov)))
    return sol.x, cov, float(np.linalg.norm(sol.fun)), ok


def _sd(cov, i):
    v = cov[i, i]
    return float(np.sqrt(v)) if np.isfinite(v) and v >= 0 else float("inf")


def fit_exponential(h: Histogram, t_min: float, t_max: float | None = None) -> FitResult:
    """``A exp(-(t - t_min)/tau) + c`` on bins whose centres lie in [t_min, t_max]."""
    x = h.centers
    sel = x >= t_min
    if t_max is not None:
        sel &= x <= t_max
    y = h.counts[sel].astype(float)
    t = x[sel] - t_min
    if np.count_nonzero(y) < 5:
        raise ValueError("exponential fit needs at least five populated bins after t_min")
    if np.ptp(y) == 0:
        return FitResult("exponential", {"amplitude": 0.0, "tau": float("nan"), "offset": float(y[0])},
                         {"amplitude": float("inf"), "tau": float("inf"), "offset": float("inf")},
                         0.0, False, {"reason": "flat data"})
    c0 = float(np.min(y))
    a0 = float(y[0] - c0) or float(np.max(y) - c0)
    excess = np.clip(y - c0, 0, None)
    tau0 = float(np.sum(excess * t) / np.sum(excess)) if np.sum(excess) > 0 else float(np.ptp(t)) / 3
    tau0 = max(tau0, h.bin_width_ns)
    p, cov, rn, ok = _weighted_fit("exponential", t, y, [a0, tau0, c0])
    ok = ok and p[0] > 0 and p[1] > 0 and _sd(cov, 1) < abs(p[1])
    return FitResult(
        "exponential",
        {"amplitude": float(p[0]), "tau": float(p[1]), "offset": float(p[2])},
        {"amplitude": _sd(cov, 0), "tau": _sd(cov, 1), "offset": _sd(cov, 2)},
        rn, bool(ok), {"t_min": t_min},
    )


def fit_gaussian_peak(h: Histogram, window: tuple[float, float]) -> FitResult:
    """Gaussian plus constant inside ``window`` (ns); reports centre and FWHM."""
    x = h.centers
    sel = (x >= window[0]) & (x <= window[1])
    if np.count_nonzero(sel) < 5:
        raise ValueError("window must contain at least five bins")
    return _fit_gaussian(x[sel], h.counts[sel].astype(float))


def _fit_gaussian(x, y):
    c0 = float(np.min(y))
    i = int(np.argmax(y))
    a0 = float(y[i] - c0)
    if a0 <= 0:
        raise ValueError("no peak inside the fit window")
    above = x[y - c0 > a0 / 2]
    s0 = max(float(np.ptp(above)) / SIGMA_TO_FWHM, np.min(np.diff(x)))
    p, cov, rn, ok = _weighted_fit("gaussian", x, y, [a0, float(x[i]), s0, c0])
    s = abs(p[2])
    return FitResult(
        "gaussian",
        {"amplitude": float(p[0]), "center": float(p[1]), "fwhm": float(SIGMA_TO_FWHM * s), "offset": float(p[3])},
        {"amplitude": _sd(cov, 0), "center": _sd(cov, 1), "fwhm": SIGMA_TO_FWHM * _sd(cov, 2), "offset": _sd(cov, 3)},
        rn, bool(ok and p[0] > 0),
    )


def nm_to_uev(delta_nm, wavelength_nm: float):
    """Energy difference (micro-eV) for a small wavelength difference at ``wavelength_nm``."""
    return PLANCK_EV * C_LIGHT * np.asarray(delta_nm) * 1e-9 / (wavelength_nm * 1e-9) ** 2 * 1e6


def _fit_lorentz(x, y, sigma):
    c0 = float(np.min(y))
    i = int(np.argmax(y))
    a0 = float(y[i] - c0)
    above = x[y - c0 > a0 / 2]
    w0 = max(float(np.ptp(above)), float(np.min(np.abs(np.diff(x)))))
    return _weighted_fit("lorentzian", x, y, [a0, float(x[i]), w0, c0], sigma)


def fit_lorentzian_pair(spectrum_x, y1, y2, wavelength_nm: float | None = None, sigma=None) -> FitResult:
    """Fit both spectra with Lorentzians; the centre difference (y2 - y1) is the splitting.

    ``spectrum_x`` is wavelength in nm. ``sigma`` overrides the Poisson weights
    (pass ``np.ones_like`` for spectra that are not photon counts).
    """
    x = np.asarray(spectrum_x, dtype=float)
    y1, y2 = np.asarray(y1, dtype=float), np.asarray(y2, dtype=float)
    if y1.shape != x.shape or y2.shape != x.shape:
        raise ValueError("spectra must share the wavelength axis")
    p1, c1, r1, ok1 = _fit_lorentz(x, y1, sigma)
    p2, c2, r2, ok2 = _fit_lorentz(x, y2, sigma)
    lam = float(np.mean(x)) if wavelength_nm is None else wavelength_nm
    d_nm = p2[1] - p1[1]
    s_nm = float(np.hypot(_sd(c1, 1), _sd(c2, 1)))
    return FitResult(
        "lorentzian_pair",
        {
            "center_1_nm": float(p1[1]), "center_2_nm": float(p2[1]),
            "fwhm_1_nm": float(abs(p1[2])), "fwhm_2_nm": float(abs(p2[2])),
            "splitting_nm": float(d_nm), "splitting_uev": float(nm_to_uev(-d_nm, lam)),
        },
        {
            "center_1_nm": _sd(c1, 1), "center_2_nm": _sd(c2, 1),
            "fwhm_1_nm": _sd(c1, 2), "fwhm_2_nm": _sd(c2, 2),
            "splitting_nm": s_nm, "splitting_uev": float(abs(nm_to_uev(s_nm, lam))),
        },
        float(np.hypot(r1, r2)), bool(ok1 and ok2),
        {"wavelength_nm": lam},
    )


def fit_power_law(powers, intensities) -> FitResult:
    """Straight line in log-log space: ``log I = s log P + b``."""
    p = np.asarray(powers, dtype=float)
    i = np.asarray(intensities, dtype=float)
    if p.size < 3 or p.shape != i.shape:
        raise ValueError("power-law fit needs at least three matched points")
    if np.any(p <= 0) or np.any(i <= 0):
        raise ValueError("power-law fit needs positive powers and intensities")
    r = stats.linregress(np.log(p), np.log(i))
    resid = np.log(i) - (r.slope * np.log(p) + r.intercept)
    return FitResult(
        "power_law",
        {"slope": float(r.slope), "log_prefactor": float(r.intercept)},
        {"slope": float(r.stderr), "log_prefactor": float(r.intercept_stderr)},
        float(np.linalg.norm(resid)), True,
    )


def fit_sinusoid(angles_deg, counts, background=None) -> FitResult:
    """``C(theta) = a + b cos(4 theta) + c sin(4 theta)`` with period fixed at 45 deg.

    Visibility ``V = sqrt(b^2 + c^2)/a`` and fidelity ``(1 + V)/2``. If
    ``background`` (expected noise counts per angle) is given, background-
    subtracted values are reported alongside the raw ones.
    """
    th = np.radians(np.asarray(angles_deg, dtype=float))
    y = np.asarray(counts, dtype=float)
    if th.size < 4 or th.shape != y.shape:
        raise ValueError("sinusoid fit needs at least four angles")
    if np.ptp(np.degrees(th)) < 45.0 - 1e-9:
        raise ValueError("angles must span at least one 45-degree period")
    w = 1.0 / np.sqrt(np.maximum(y, 1.0))
    X = np.column_stack([np.ones_like(th), np.cos(4 * th), np.sin(4 * th)])
    coef, *_ = np.linalg.lstsq(X * w[:, None], y * w, rcond=None)
    cov = np.linalg.inv((X * w[:, None]).T @ (X * w[:, None]))
    a, b, c = coef
    amp = float(np.hypot(b, c))
    phi = float(np.arctan2(c, b))

    def vis(offset):
        base = a - offset
        v = amp / base
        g = np.array([-v / base, b / (amp * base) if amp else 0.0, c / (amp * base) if amp else 0.0])
        return float(v), float(np.sqrt(g @ cov @ g))

    v, sv = vis(0.0)
    max_deg = float(np.mod(np.degrees(phi) / 4, 90.0))
    params = {
        "mean": float(a), "amplitude": amp, "phase": phi, "visibility": v, "fidelity": (1 + v) / 2,
        "max_angle_deg": max_deg, "min_angle_deg": float(np.mod(max_deg + 45.0, 90.0)),
    }
    unc = {"mean": float(np.sqrt(cov[0, 0])), "visibility": sv, "fidelity": sv / 2}
    if background is not None:
        bg = float(np.mean(np.broadcast_to(np.asarray(background, dtype=float), y.shape)))
        vb, svb = vis(bg)
        params.update(visibility_bgsub=vb, fidelity_bgsub=(1 + vb) / 2, background=bg)
        unc.update(visibility_bgsub=svb, fidelity_bgsub=svb / 2)
    resid = (X @ coef - y) * w
    return FitResult("sinusoid", params, unc, float(np.linalg.norm(resid)), True)


@dataclass(frozen=True)
class Estimate:
    value: float
    uncertainty: float
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"value": self.value, "uncertainty": self.uncertainty, **self.details}


def estimate_g2(hbt_hist: Histogram, period_ns: float, peak_width_ns: float | None = None) -> Estimate:
    """Zero-delay peak area over the mean side-peak area.

    Peak areas are summed over ``peak_width_ns`` (default: one full period)
    around each multiple of the period that fits inside the histogram.
    """
    width = period_ns if peak_width_ns is None else peak_width_ns
    lo, hi = hbt_hist.edges[0], hbt_hist.edges[-1]
    kmax = int(np.floor((min(-lo, hi) - width / 2) / period_ns + 1e-9))
    side_k = [k for k in range(-kmax, kmax + 1) if k != 0]
    if len(side_k) < 3:
        raise ValueError("g2 estimate needs at least three side peaks inside the histogram")
    zero = float(window_counts(hbt_hist, 0.0, width))
    sides = np.array([float(window_counts(hbt_hist, k * period_ns, width)) for k in side_k])
    mean_side = float(sides.mean())
    if mean_side <= 0:
        raise ValueError("side peaks are empty")
    g2 = zero / mean_side
    unc = np.sqrt(max(zero, 1.0)) / mean_side if zero == 0 else g2 * np.sqrt(1 / zero + 1 / sides.sum())
    return Estimate(float(g2), float(unc), {"zero_delay_counts": zero, "side_peak_mean": mean_side, "n_side_peaks": len(side_k)})


def _check_disjoint(windows):
    iv = sorted((c - w / 2, c + w / 2) for c, w in windows)
    for (a0, a1), (b0, b1) in zip(iv, iv[1:]):
        if b0 < a1 - 1e-12:
            raise ValueError("signal and noise windows must be disjoint")


def estimate_snr(h: Histogram, signal_window: tuple[float, float], noise_windows) -> Estimate:
    """(signal - scaled floor) / scaled floor; windows are (center, width) in ns."""
    noise_windows = list(noise_windows)
    if not noise_windows:
        raise ValueError("at least one noise window is required")
    _check_disjoint([signal_window, *noise_windows])
    s = float(window_counts(h, *signal_window))
    n_counts = sum(float(window_counts(h, *w)) for w in noise_windows)
    n_width = sum(w for _, w in noise_windows)
    floor = n_counts / n_width * signal_window[1]
    if floor <= 0:
        return Estimate(float("inf"), float("nan"), {"signal_counts": s, "noise_floor": 0.0})
    snr = (s - floor) / floor
    scale = signal_window[1] / n_width
    var = s / floor**2 + (s / floor**2) ** 2 * scale**2 * n_counts
    return Estimate(float(snr), float(np.sqrt(var)), {"signal_counts": s, "noise_floor": floor})


@dataclass(frozen=True)
class ModeCount:
    count: int
    positions_ns: np.ndarray
    prominences: np.ndarray

    def to_dict(self) -> dict:
        return {"count": self.count, "positions_ns": [float(p) for p in self.positions_ns]}


def count_modes(h: Histogram, retrieval_window: tuple[float, float], expected_separation: float) -> ModeCount:
    """Local maxima inside the window whose local prominence exceeds 3 sigma.

    Prominence is measured against the lowest point within half the expected
    separation on either side, and sigma is the Poisson spread of that
    peak-minus-base difference, ``sqrt(peak + base)``. ``expected_separation``
    also sets the minimum peak spacing; for a single mode pass the expected
    peak width scale (any positive value larger than two bins).
    """
    if not h.bin_width_ns < expected_separation / 2:
        raise ValueError("bin width must be below half the expected mode separation")
    y = h.counts.astype(float)
    x = h.centers
    half = max(1, int(round(expected_separation / 2 / h.bin_width_ns)))
    dist = max(1, int(np.floor(expected_separation / 2 / h.bin_width_ns)))
    peaks, props = signal.find_peaks(y, distance=dist, prominence=0.0, wlen=2 * half + 1)
    lo, hi = retrieval_window
    pos, proms = [], []
    for pk, prom in zip(peaks, props["prominences"]):
        base = y[pk] - prom
        if prom < 3.0 * np.sqrt(max(y[pk] + base, 1.0)):
            continue
        xc = _refine_peak(x, y, pk)
        if lo <= xc <= hi:
            pos.append(xc)
            proms.append(prom)
    return ModeCount(len(pos), np.array(pos), np.array(proms))


def _refine_peak(x, y, i):
    if 0 < i < y.size - 1:
        a, b, c = y[i - 1], y[i], y[i + 1]
        den = a - 2 * b + c
        if den < 0:
            return float(x[i] + 0.5 * (a - c) / den * (x[1] - x[0]))
    return float(x[i])


@dataclass(frozen=True)
class CorrespondenceReport:
    lag_ns: float
    correlation: float
    pairs: list
    paired_fraction: float
    flagged: bool

    @property
    def residuals_ns(self) -> np.ndarray:
        return np.array([p[2] for p in self.pairs])

    def to_dict(self) -> dict:
        return {
            "lag_ns": self.lag_ns,
            "correlation": self.correlation,
            "paired_fraction": self.paired_fraction,
            "flagged": self.flagged,
            "pairs": [[float(a), float(b), float(r)] for a, b, r in self.pairs],
        }


def mode_correspondence(
    transmitted_hist: Histogram,
    stored_hist: Histogram,
    storage_time_ns: float,
    window: tuple[float, float] | None = None,
    expected_separation: float | None = None,
    pair_tolerance_ns: float = 1.0,
    min_correlation: float = 0.5,
) -> CorrespondenceReport:
    """Match the transmitted mode train against the stored one.

    The lag is the argmax of the circular cross-correlation between the
    baseline-subtracted transmitted window and the stored histogram with that
    window masked out (so the same histogram may be passed twice). Peaks are
    then paired nearest-neighbour after shifting by the lag.
    """
    if transmitted_hist.bin_width_ns != stored_hist.bin_width_ns or transmitted_hist.n_bins != stored_hist.n_bins:
        raise ValueError("histograms must share binning")
    bw = transmitted_hist.bin_width_ns
    if window is None:
        window = (transmitted_hist.edges[0], transmitted_hist.edges[0] + storage_time_ns)
    xc = transmitted_hist.centers
    inside = (xc >= window[0]) & (xc < window[1])
    a = transmitted_hist.counts.astype(float)
    b = stored_hist.counts.astype(float)
    xa = np.where(inside, a - np.median(a[inside]), 0.0)
    yb = np.where(inside, 0.0, b - np.median(b[~inside]))
    corr = np.real(np.fft.ifft(np.conj(np.fft.fft(xa)) * np.fft.fft(yb)))
    lag_bins = int(np.argmax(corr))
    lag = lag_bins * bw
    shifted = np.roll(yb, -lag_bins)
    den = np.linalg.norm(xa[inside]) * np.linalg.norm(shifted[inside])
    rho = float(xa[inside] @ shifted[inside] / den) if den > 0 else 0.0

    sep = expected_separation if expected_separation is not None else 4 * bw + 2.0
    tm = count_modes(transmitted_hist, window, sep)
    sm = count_modes(stored_hist, (window[0] + lag, window[1] + lag), sep)
    if tm.count == 0 or sm.count == 0:
        raise ValueError("no peaks found in one of the windows")
    pairs = []
    sp = sm.positions_ns - lag
    for t in tm.positions_ns:
        j = int(np.argmin(np.abs(sp - t)))
        pairs.append((float(t), float(sm.positions_ns[j]), float(sp[j] - t)))
    frac = float(np.mean([abs(r) <= pair_tolerance_ns for _, _, r in pairs]))
    return CorrespondenceReport(float(lag), rho, pairs, frac, rho < min_correlation)
