"""Scenario configuration: a versioned JSON document parsed strictly.

Every section maps onto a frozen dataclass. Unknown keys and constraint
violations are collected and reported together in one :class:`ConfigError`.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import MISSING, dataclass, field, fields, is_dataclass
from importlib import resources
from pathlib import Path

from ..detection import DetectorSpec
from ..memory import SandwichSpec
from ..optics import BackgroundSpec, BandpassFilter, CavitySpec, EtalonSpec, FiberLink
from ..source import EmitterSpec, ExcitationPulseSpec

SCHEMA_VERSION = 1
KINDS = ("storage", "polarization", "hbt")
FILTER_TYPES = {"etalon": EtalonSpec, "cavity": CavitySpec, "bandpass": BandpassFilter, "fiber": FiberLink}
PRESET_NAMES = ("fig3b", "fig3c", "fig4a", "fig4b", "fig4c", "hbt")


class ConfigError(ValueError):
    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("invalid scenario configuration:\n  " + "\n  ".join(self.violations))


@dataclass(frozen=True)
class HeatingSpec:
    laser: str = "910nm"
    power_mw: float = 24.0


@dataclass(frozen=True)
class PumpConfig:
    sweep_span_mhz: float = 100.0
    cycle_duration_us: float = 200.0
    sideband_driver_mhz: float = 100.0
    sideband_orders: int = 2


@dataclass(frozen=True)
class MemoryConfig:
    storage_time_ns: float = 40.0
    tooth_shape: str = "gaussian"
    edge_width_mhz: float = 5.0
    calibration: str | None = None  # path to a calibration JSON; None uses the shipped one
    pump: PumpConfig = field(default_factory=PumpConfig)
    sandwich: SandwichSpec = field(default_factory=SandwichSpec)
    grid_span_ghz: float = 16.0
    grid_points: int = 2**19
    decay_slices: int = 5


@dataclass(frozen=True)
class PolarizationConfig:
    hwp1_deg: float = 22.5
    phase_plate_rad: float = 0.0
    hwp2_deg: tuple[float, ...] = (22.5,)
    window_ns: float = 2.0


@dataclass(frozen=True)
class TimingSpec:
    preparation_ms: float = 11.5
    wait_ms: float = 2.5
    retrieval_ms: float = 10.0
    final_wait_ms: float = 1.0


@dataclass(frozen=True)
class AnalysisConfig:
    bin_width_ns: float = 1.0
    signal_window_ns: float = 2.0
    noise_windows_ns: tuple[tuple[float, float], ...] = ()  # (start, end) pairs
    fit_window_ns: float = 4.0


@dataclass(frozen=True)
class HBTConfig:
    n_pulses: int = 1_000_000
    source: str = "single"  # single | coherent
    signal_fraction: float = 1.0
    mean_photon_number: float = 0.5
    correlation_window_ns: float = 562.5
    bin_width_ns: float = 1.0


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    kind: str = "storage"
    seed: int = 0
    schema_version: int = SCHEMA_VERSION
    description: str = ""
    emitter: EmitterSpec = field(default_factory=EmitterSpec)
    heating: HeatingSpec = field(default_factory=HeatingSpec)
    pulses: ExcitationPulseSpec = field(default_factory=ExcitationPulseSpec)
    filters: tuple = ()
    background: BackgroundSpec = field(default_factory=BackgroundSpec)
    memory: MemoryConfig | None = field(default_factory=MemoryConfig)
    polarization: PolarizationConfig | None = None
    detector: DetectorSpec = field(default_factory=DetectorSpec)
    collection_efficiency: float = 1.0
    timing: TimingSpec = field(default_factory=TimingSpec)
    integration_s: float = 100.0
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    hbt: HBTConfig | None = None
    targets: dict = field(default_factory=dict)
    output_dir: str | None = None

    @property
    def storage_time_ns(self) -> float:
        return self.memory.storage_time_ns if self.memory else 0.0

    def to_dict(self) -> dict:
        return _to_plain(self)

    def config_hash(self) -> str:
        return hashlib.sha256(canonical_json(self.to_dict()).encode()).hexdigest()


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _to_plain(obj):
    if is_dataclass(obj):
        out = {}
        for f in fields(obj):
            v = getattr(obj, f.name)
            if obj.__class__ is ScenarioConfig and f.name == "filters":
                out[f.name] = [dict(type=_filter_type(el), **_to_plain(el)) for el in v]
            else:
                out[f.name] = _to_plain(v)
        return out
    if isinstance(obj, dict):
        return {k: _to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_plain(v) for v in obj]
    return obj


def _filter_type(el) -> str:
    for name, cls in FILTER_TYPES.items():
        if isinstance(el, cls):
            return name
    raise TypeError(el)


def _tupleize(v):
    if isinstance(v, list):
        return tuple(_tupleize(x) for x in v)
    return v


def _build(cls, data, path: str, errors: list):
    """Construct dataclass ``cls`` from ``data``; record problems in ``errors``."""
    if data is None:
        return None
    if not isinstance(data, dict):
        errors.append(f"{path}: expected an object")
        return None
    names = {f.name: f for f in fields(cls)}
    for k in sorted(set(data) - set(names)):
        errors.append(f"{path}.{k}: unknown key")
    kwargs = {}
    for name, f in names.items():
        if name not in data:
            if f.default is MISSING and f.default_factory is MISSING:
                errors.append(f"{path}.{name}: required")
            continue
        v = data[name]
        sub = _NESTED.get((cls, name))
        if sub is not None:
            v = _build(sub, v, f"{path}.{name}", errors)
            if v is None and data[name] is not None:
                continue
        elif cls is EmitterSpec and name == "heating_calibration":
            v = {laser: tuple(tuple(p) for p in anchors) for laser, anchors in v.items()}
        elif cls is EmitterSpec and name == "polarization_weights":
            v = tuple(v)
        else:
            v = _tupleize(v)
        kwargs[name] = v
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        errors.append(f"{path}: {exc}")
        return None


_NESTED = {
    (MemoryConfig, "pump"): PumpConfig,
    (MemoryConfig, "sandwich"): SandwichSpec,
}

_SECTIONS = {
    "emitter": EmitterSpec,
    "heating": HeatingSpec,
    "pulses": ExcitationPulseSpec,
    "background": BackgroundSpec,
    "memory": MemoryConfig,
    "polarization": PolarizationConfig,
    "detector": DetectorSpec,
    "timing": TimingSpec,
    "analysis": AnalysisConfig,
    "hbt": HBTConfig,
}

TARGET_KEYS = (
    "echo_peaks_ns", "snr", "noise_budget", "fidelity", "max_angle_deg", "min_angle_deg",
    "modes", "lag_ns", "paired_fraction", "broadening_ratio", "g2", "efficiency",
)


def config_from_dict(data: dict) -> ScenarioConfig:
    errors: list[str] = []
    if not isinstance(data, dict):
        raise ConfigError(["top level: expected an object"])
    data = copy.deepcopy(data)
    top = {f.name for f in fields(ScenarioConfig)}
    for k in sorted(set(data) - top):
        errors.append(f"{k}: unknown key")
    if data.get("schema_version") != SCHEMA_VERSION:
        errors.append(f"schema_version: expected {SCHEMA_VERSION}, got {data.get('schema_version')!r}")
    if "name" not in data:
        errors.append("name: required")
    kwargs = {k: data[k] for k in ("name", "kind", "seed", "schema_version", "description",
                                   "collection_efficiency", "integration_s", "output_dir") if k in data}
    for key, cls in _SECTIONS.items():
        if key in data:
            kwargs[key] = _build(cls, data[key], key, errors)
    filters = []
    for i, spec in enumerate(data.get("filters", [])):
        spec = dict(spec)
        t = spec.pop("type", None)
        if t not in FILTER_TYPES:
            errors.append(f"filters[{i}].type: must be one of {sorted(FILTER_TYPES)}")
            continue
        el = _build(FILTER_TYPES[t], spec, f"filters[{i}]", errors)
        if el is not None:
            filters.append(el)
    kwargs["filters"] = tuple(filters)
    targets = data.get("targets", {})
    for k in sorted(set(targets) - set(TARGET_KEYS)):
        errors.append(f"targets.{k}: unknown key")
    kwargs["targets"] = targets
    if errors:
        raise ConfigError(errors)
    try:
        cfg = ScenarioConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError([str(exc)]) from None
    errors = validate(cfg)
    if errors:
        raise ConfigError(errors)
    return cfg


def validate(cfg: ScenarioConfig) -> list[str]:
    errors = []
    if cfg.kind not in KINDS:
        errors.append(f"kind: must be one of {KINDS}")
    if not isinstance(cfg.seed, int) or cfg.seed < 0:
        errors.append("seed: must be a non-negative integer")
    if not 0 < cfg.collection_efficiency <= 1:
        errors.append("collection_efficiency: must be in (0, 1]")
    if not cfg.integration_s > 0:
        errors.append("integration_s: must be positive")
    p = cfg.pulses
    if cfg.kind == "hbt":
        if cfg.hbt is None:
            errors.append("hbt: section required for kind 'hbt'")
        elif cfg.hbt.source not in ("single", "coherent"):
            errors.append("hbt.source: must be 'single' or 'coherent'")
        elif not 0 < cfg.hbt.signal_fraction <= 1:
            errors.append("hbt.signal_fraction: must be in (0, 1]")
        return errors
    m = cfg.memory
    if m is None:
        errors.append("memory: section required for storage scenarios")
        return errors
    if m.storage_time_ns >= p.period_ns:
        errors.append(f"storage_time < period: T_storage {m.storage_time_ns} ns must be below T_period {p.period_ns} ns")
    if p.n_modes > 1 and p.n_modes * p.mode_separation_ns > m.storage_time_ns:
        errors.append(
            f"modes fit in storage time: {p.n_modes} x {p.mode_separation_ns} ns exceeds T_storage {m.storage_time_ns} ns"
        )
    if m.tooth_shape not in ("gaussian", "lorentzian", "square"):
        errors.append("memory.tooth_shape: unknown shape")
    if m.decay_slices < 1:
        errors.append("memory.decay_slices: must be >= 1")
    if m.grid_points & (m.grid_points - 1):
        errors.append("memory.grid_points: must be a power of two")
    bw = cfg.analysis.bin_width_ns
    for name, v in (("pulses.period_ns", p.period_ns), ("pulses.mode_separation_ns", p.mode_separation_ns)):
        if abs(v / 0.05 - round(v / 0.05)) > 1e-6:
            errors.append(f"{name}: must be a multiple of 0.05 ns")
    if abs(bw / 0.05 - round(bw / 0.05)) > 1e-6 or abs(p.period_ns / bw - round(p.period_ns / bw)) > 1e-6:
        errors.append("analysis.bin_width_ns: must be a multiple of 0.05 ns dividing the period")
    if not any(isinstance(f, EtalonSpec) for f in cfg.filters):
        errors.append("filters: at least one etalon is required")
    for w in cfg.analysis.noise_windows_ns:
        if len(w) != 2 or not w[1] > w[0]:
            errors.append("analysis.noise_windows_ns: each window must be a (start, end) pair with end > start")
    if cfg.kind == "polarization" and cfg.polarization is None:
        errors.append("polarization: section required for kind 'polarization'")
    for name in ("preparation_ms", "wait_ms", "retrieval_ms", "final_wait_ms"):
        if not getattr(cfg.timing, name) > 0:
            errors.append(f"timing.{name}: must be positive")
    return errors


def parse_config(path) -> ScenarioConfig:
    with open(path) as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"{path}: not valid JSON ({exc})"]) from None
    return config_from_dict(data)


def dump_config(cfg: ScenarioConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), sort_keys=True, indent=2) + "\n")


def preset_path(name: str):
    if name not in PRESET_NAMES:
        raise KeyError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")
    return resources.files("qdafc.scenario") / "presets" / f"{name}.json"


def load_preset(name: str) -> ScenarioConfig:
    with resources.as_file(preset_path(name)) as p:
        return parse_config(p)


def with_overrides(cfg: ScenarioConfig, changes: dict) -> ScenarioConfig:
    """Copy of ``cfg`` with dotted-path overrides, e.g. ``{"detector.dark_rate": 0.0}``."""
    data = cfg.to_dict()
    for dotted, value in changes.items():
        node = data
        keys = dotted.split(".")
        for k in keys[:-1]:
            node = node[k]
        node[keys[-1]] = value
    return config_from_dict(data)

