"""Detector clicks, TCSPC histograms and HBT correlation histograms.

Times are in ns and rates in counts/s. A click remembers where it came from
(photon, dark, ambient, pump leak) so the noise budget can be audited.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .rng import stream
from .source import PhotonStream

PHOTON, DARK, AMBIENT, PUMP = 0, 1, 2, 3
ORIGINS = {PHOTON: "photon", DARK: "dark", AMBIENT: "ambient", PUMP: "pump"}


@dataclass(frozen=True)
class DetectorSpec:
    efficiency: float = 0.08
    dark_rate: float = 1.5
    timing_jitter_sigma_ns: float = 0.1
    ambient_rate: float = 0.0
    pump_leak_rate: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError("efficiency must be in [0, 1]")
        for name in ("dark_rate", "timing_jitter_sigma_ns", "ambient_rate", "pump_leak_rate"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def noise_rate(self) -> float:
        """Total noise rate while the pump leak is active."""
        return self.dark_rate + self.ambient_rate + self.pump_leak_rate


@dataclass(frozen=True)
class PhaseWindow:
    start_ns: float
    end_ns: float
    retrieval: bool = True

    def __post_init__(self):
        if not self.end_ns > self.start_ns:
            raise ValueError("phase window must have positive duration")

    @property
    def duration_s(self) -> float:
        return (self.end_ns - self.start_ns) * 1e-9


@dataclass(frozen=True)
class Clicks:
    time_ns: np.ndarray
    origin: np.ndarray

    def __len__(self) -> int:
        return int(self.time_ns.size)

    def count(self, origin: int) -> int:
        return int(np.count_nonzero(self.origin == origin))


@dataclass(frozen=True)
class Histogram:
    bin_width_ns: float
    origin_ns: float
    counts: np.ndarray
    total_integration_s: float = 0.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        c = np.asarray(self.counts)
        if not self.bin_width_ns > 0:
            raise ValueError("bin width must be positive")
        if np.any(c < 0):
            raise ValueError("histogram counts must be non-negative")
        object.__setattr__(self, "counts", c)

    @property
    def n_bins(self) -> int:
        return int(self.counts.size)

    @property
    def edges(self) -> np.ndarray:
        return self.origin_ns + self.bin_width_ns * np.arange(self.n_bins + 1)

    @property
    def centers(self) -> np.ndarray:
        return self.origin_ns + self.bin_width_ns * (np.arange(self.n_bins) + 0.5)

    @property
    def total(self):
        return self.counts.sum()

    def __add__(self, other: "Histogram") -> "Histogram":
        if (other.bin_width_ns, other.origin_ns, other.n_bins) != (self.bin_width_ns, self.origin_ns, self.n_bins):
            raise ValueError("histograms have different binning")
        return Histogram(
            self.bin_width_ns, self.origin_ns, self.counts + other.counts,
            self.total_integration_s + other.total_integration_s, dict(self.metadata),
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bin_start_ns", "counts"])
        for start, c in zip(self.edges[:-1], self.counts):
            w.writerow([f"{start:.6f}", _fmt_count(c)])
        return buf.getvalue()

    def sidecar(self) -> dict:
        return {
            "bin_width_ns": self.bin_width_ns,
            "origin_ns": self.origin_ns,
            "n_bins": self.n_bins,
            "total_integration_s": self.total_integration_s,
            **self.metadata,
        }

    @classmethod
    def from_csv(cls, text: str, sidecar: dict | None = None) -> "Histogram":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [h.strip() for h in rows[0]] != ["bin_start_ns", "counts"]:
            raise ValueError("histogram CSV must have header bin_start_ns,counts")
        data = np.array([[float(a), float(b)] for a, b in rows[1:]])
        if data.shape[0] < 2:
            raise ValueError("histogram CSV needs at least two bins")
        starts, counts = data[:, 0], data[:, 1]
        meta = dict(sidecar or {})
        width = float(meta.pop("bin_width_ns", starts[1] - starts[0]))
        meta.pop("origin_ns", None)
        meta.pop("n_bins", None)
        integ = float(meta.pop("total_integration_s", 0.0))
        if np.all(counts == np.round(counts)):
            counts = counts.astype(np.int64)
        return cls(width, float(starts[0]), counts, integ, meta)


def _fmt_count(c) -> str:
    if float(c).is_integer():
        return str(int(c))
    return repr(float(c))


def write_histogram(h: Histogram, csv_path, json_path=None) -> None:
    with open(csv_path, "w", newline="") as f:
        f.write(h.to_csv())
    if json_path is not None:
        with open(json_path, "w") as f:
            json.dump(h.sidecar(), f, sort_keys=True, indent=2)
            f.write("\n")


def read_histogram(csv_path, json_path=None) -> Histogram:
    with open(csv_path) as f:
        text = f.read()
    side = None
    if json_path is not None:
        with open(json_path) as f:
            side = json.load(f)
    return Histogram.from_csv(text, side)


def _noise_clicks(rng, rate: float, windows: Sequence[PhaseWindow], origin: int):
    times = []
    for w in windows:
        n = rng.poisson(rate * w.duration_s)
        times.append(w.start_ns + rng.random(n) * (w.end_ns - w.start_ns))
    t = np.concatenate(times) if times else np.zeros(0)
    return t, np.full(t.size, origin, dtype=np.int8)


def detect(
    photons: PhotonStream,
    spec: DetectorSpec,
    phase_windows: Sequence[PhaseWindow] | None = None,
    seed=None,
) -> Clicks:
    """Thin photons by the efficiency, add jitter, and add Poisson noise clicks.

    Dark and ambient clicks run over every live window; pump-leak clicks only
    over retrieval windows. Photons outside all live windows are not seen.
    With no windows given, one retrieval window spans the photon record.
    """
    rng = stream(seed, "detection.detect")
    t = photons.time_ns
    if phase_windows is None:
        end = float(np.ceil(t.max()) + 1.0) if t.size else 1.0
        phase_windows = [PhaseWindow(0.0, end, True)]
    live = np.zeros(t.size, dtype=bool)
    for w in phase_windows:
        live |= (t >= w.start_ns) & (t < w.end_ns)
    hit = live & (rng.random(t.size) < spec.efficiency)
    sig = t[hit]
    if spec.timing_jitter_sigma_ns > 0:
        sig = sig + rng.normal(0.0, spec.timing_jitter_sigma_ns, sig.size)
    parts = [(sig, np.full(sig.size, PHOTON, dtype=np.int8))]
    parts.append(_noise_clicks(rng, spec.dark_rate, phase_windows, DARK))
    parts.append(_noise_clicks(rng, spec.ambient_rate, phase_windows, AMBIENT))
    parts.append(_noise_clicks(rng, spec.pump_leak_rate, [w for w in phase_windows if w.retrieval], PUMP))
    times = np.concatenate([p[0] for p in parts])
    origin = np.concatenate([p[1] for p in parts])
    order = np.argsort(times, kind="stable")
    return Clicks(times[order], origin[order])


def _n_bins(span: float, bin_width: float) -> int:
    r = span / bin_width
    return int(round(r)) if abs(r - round(r)) < 1e-9 else int(np.ceil(r))


def tcspc(clicks: Clicks | np.ndarray, trigger_period_ns: float, bin_width_ns: float,
          origin_ns: float = 0.0, integration_s: float = 0.0) -> Histogram:
    """Fold click times modulo the trigger period and bin them."""
    if not trigger_period_ns > bin_width_ns:
        raise ValueError("trigger period must exceed the bin width")
    t = clicks.time_ns if isinstance(clicks, Clicks) else np.asarray(clicks, dtype=float)
    folded = np.mod(t - origin_ns, trigger_period_ns)
    nb = _n_bins(trigger_period_ns, bin_width_ns)
    idx = np.minimum((folded / bin_width_ns).astype(np.int64), nb - 1)
    counts = np.bincount(idx, minlength=nb).astype(np.int64)
    return Histogram(bin_width_ns, origin_ns, counts, integration_s)


def hbt(clicks: Clicks | np.ndarray, correlation_window_ns: float, bin_width_ns: float,
        splitter_ratio: float = 0.5, seed=None) -> Histogram:
    """Start-stop delay histogram (t2 - t1) after random routing to two detectors.

    Bins are centred so that zero delay sits in the middle of the central bin.
    """
    t = np.sort(clicks.time_ns if isinstance(clicks, Clicks) else np.asarray(clicks, dtype=float))
    if t.size < 2:
        raise ValueError("HBT needs at least two clicks")
    if not 0 < splitter_ratio < 1:
        raise ValueError("splitter ratio must be in (0, 1)")
    rng = stream(seed, "detection.hbt")
    to_two = rng.random(t.size) >= splitter_ratio
    half = int(np.ceil(correlation_window_ns / bin_width_ns - 0.5))
    nb = 2 * half + 1
    origin = -(half + 0.5) * bin_width_ns
    counts = np.zeros(nb, dtype=np.int64)
    k = 1
    while k < t.size:
        dt = t[k:] - t[:-k]
        near = dt <= correlation_window_ns
        if not near.any():
            break
        a, b = to_two[:-k][near], to_two[k:][near]
        d = dt[near]
        # pair (earlier, later): delay t2 - t1 is +d if the later click is on detector 2
        delay = np.concatenate([d[~a & b], -d[a & ~b]])
        idx = np.floor((delay - origin) / bin_width_ns).astype(np.int64)
        ok = (idx >= 0) & (idx < nb)
        counts += np.bincount(idx[ok], minlength=nb)
        k += 1
    return Histogram(bin_width_ns, origin, counts, metadata={"splitter_ratio": splitter_ratio})


def window_counts(h: Histogram, center: float, width: float) -> float:
    """Counts in [center - width/2, center + width/2], partial bins pro-rated."""
    lo, hi = center - width / 2, center + width / 2
    e = h.edges
    if lo < e[0] - 1e-9 or hi > e[-1] + 1e-9:
        raise ValueError(f"window [{lo}, {hi}] ns outside histogram range [{e[0]}, {e[-1]}] ns")
    overlap = np.clip(np.minimum(e[1:], hi) - np.maximum(e[:-1], lo), 0.0, None) / h.bin_width_ns
    out = float(np.sum(overlap * h.counts))
    return int(round(out)) if abs(out - round(out)) < 1e-9 else out
