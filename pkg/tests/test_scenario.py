import filecmp
import json

import numpy as np
import pytest

from qdafc.scenario.config import (
    PRESET_NAMES,
    ConfigError,
    config_from_dict,
    dump_config,
    load_preset,
    parse_config,
    with_overrides,
)
from qdafc.analysis import estimate_snr
from qdafc.detection import Histogram
from qdafc.scenario.reproduce import reproduce_all
from qdafc.scenario.runner import calibrate_noise, expected_histograms, load_calibration, run
from qdafc.scenario.schedule import Phase, TimingSchedule, build_schedule


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_presets_round_trip(name, tmp_path):
    cfg = load_preset(name)
    assert config_from_dict(cfg.to_dict()) == cfg
    dump_config(cfg, tmp_path / "c.json")
    assert parse_config(tmp_path / "c.json") == cfg


def test_storage_time_must_be_below_period():
    with pytest.raises(ConfigError) as exc:
        with_overrides(load_preset("fig3b"), {"memory.storage_time_ns": 400.0})
    assert any("storage_time < period" in v for v in exc.value.violations)


def test_hundred_modes_fit_in_500_ns():
    cfg = load_preset("fig4c")
    assert cfg.pulses.n_modes * cfg.pulses.mode_separation_ns == pytest.approx(480.0)
    with pytest.raises(ConfigError) as exc:
        with_overrides(cfg, {"pulses.n_modes": 105})
    assert any("modes fit in storage time" in v for v in exc.value.violations)


def test_all_violations_reported_together():
    d = load_preset("fig3b").to_dict()
    d["colour"] = "blue"
    d["detector"]["efficency"] = 0.1
    d["targets"]["speed"] = {"value": 1}
    d["filters"].append({"type": "prism"})
    d["schema_version"] = 7
    with pytest.raises(ConfigError) as exc:
        config_from_dict(d)
    v = exc.value.violations
    assert len(v) == 5
    for needle in ("colour", "efficency", "speed", "filters[3]", "schema_version"):
        assert any(needle in x for x in v)


def test_semantic_violations_enumerated():
    d = load_preset("fig3b").to_dict()
    d["integration_s"] = -1.0
    d["collection_efficiency"] = 2.0
    d["kind"] = "teleport"
    with pytest.raises(ConfigError) as exc:
        config_from_dict(d)
    assert len(exc.value.violations) == 3


def test_bad_json(tmp_path):
    p = tmp_path / "x.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        parse_config(p)


def test_unknown_preset():
    with pytest.raises(KeyError):
        load_preset("fig9")


# --- schedule ----------------------------------------------------------------

@pytest.mark.parametrize("name,trials", [("fig3b", 25_000), ("fig4c", 10_000)])
def test_schedule(name, trials):
    s = build_schedule(load_preset(name))
    assert s.cycle_ms == pytest.approx(25.0)
    assert s.trials_per_cycle == trials
    assert s.pump_detector_exclusive()
    assert [p.name for p in s.phases] == ["preparation", "wait", "storage_retrieval", "wait"]
    assert s.live_fraction == pytest.approx(10 / 25)
    assert s.retrieval_elapsed_ms(2) == pytest.approx([5.0, 10.0])
    w = s.live_windows(2)
    assert [(x.start_ns, x.end_ns) for x in w] == pytest.approx([(14e6, 24e6), (39e6, 49e6)])


def test_schedule_rejects_pump_during_detection():
    with pytest.raises(ValueError, match="pump open"):
        TimingSchedule((Phase("x", 0.0, 1.0, True, True),), 400.0)
    with pytest.raises(ValueError, match="contiguous"):
        TimingSchedule((Phase("a", 0.0, 1.0, True, False), Phase("b", 2.0, 1.0, False, True)), 400.0)


# --- runs --------------------------------------------------------------------

def test_same_seed_gives_byte_identical_artifacts(tmp_path):
    cfg = load_preset("fig3b")
    a = run(cfg).write(tmp_path / "a")
    b = run(cfg).write(tmp_path / "b")
    assert [p.name for p in a] == [p.name for p in b]
    for x, y in zip(a, b):
        assert filecmp.cmp(x, y, shallow=False), x.name


def test_artifacts_traceable_to_config_hash(tmp_path):
    art = run(load_preset("fig4a"))
    art.write(tmp_path)
    h = art.provenance["config_hash"]
    assert h == art.config.config_hash()
    side = json.loads((tmp_path / "histogram.json").read_text())
    assert side["config_hash"] == h and side["seed"] == art.config.seed
    assert json.loads((tmp_path / "report.json").read_text())["provenance"]["config_hash"] == h


def test_seed_override_changes_counts_only():
    cfg = load_preset("fig3b")
    a, b = run(cfg, seed=1), run(cfg, seed=2)
    assert not np.array_equal(a.histograms["histogram"].counts, b.histograms["histogram"].counts)
    assert a.report["snr_expected"] == b.report["snr_expected"]


def test_ten_seed_ensemble_within_reported_uncertainty():
    cfg = load_preset("fig3b")
    snr = [run(cfg, seed=s).report["snr_detail"] for s in range(10)]
    expected = run(cfg).report["snr_expected"]
    for d in snr:
        assert abs(d["value"] - expected) <= 3 * d["uncertainty"]
    spread = np.std([d["value"] for d in snr], ddof=1)
    typical = np.mean([d["uncertainty"] for d in snr])
    assert 0.5 * typical < spread < 2 * typical


def test_fig3b_histogram_shape():
    art = run(load_preset("fig3b"))
    h = art.histograms["histogram"]
    assert h.bin_width_ns == 1.0 and h.n_bins == 400
    assert art.passed, art.checks


def test_fig4c_report():
    art = run(load_preset("fig4c"))
    assert art.histograms["histogram"].bin_width_ns == 0.5
    assert art.report["modes"] == 100
    assert art.report["lag_ns"] == pytest.approx(500.0, abs=0.5)


def test_hbt_preset_suppresses_zero_delay():
    art = run(load_preset("hbt"))
    assert art.report["g2"] < 0.5
    assert art.passed


def test_retrieval_phase_decay_lowers_echo():
    fresh = with_overrides(load_preset("fig3b"), {"memory.decay_slices": 1, "timing.wait_ms": 1e-6,
                                                  "timing.retrieval_ms": 1e-6})
    aged = load_preset("fig3b")
    T = aged.memory.storage_time_ns
    e_fresh = next(iter(expected_histograms(fresh).signal.values()))
    e_aged = next(iter(expected_histograms(aged).signal.values()))
    c = np.arange(e_aged.size) - 0.5 + 0.5  # 1-ns bins starting at -0.5 ns
    at = int(np.argmin(np.abs(c - T)))
    # normalise by the transmitted pulse, which the memory hardly changes
    ratio = (e_aged[at] / e_aged[0]) / (e_fresh[at] / e_fresh[0])
    assert 0.5 < ratio < 1.0


def test_calibrate_noise_reproduces_frozen_values():
    cfg = load_preset("fig3b")
    cal = calibrate_noise(cfg)
    assert cal["collection_efficiency"] == pytest.approx(cfg.collection_efficiency, rel=1e-6)
    assert cal["dark_rate"] == cfg.detector.dark_rate
    assert cal["pump_leak_rate"] == pytest.approx(cfg.detector.pump_leak_rate)
    assert cal["ambient_rate"] == pytest.approx(cfg.detector.ambient_rate)
    with pytest.raises(ValueError):
        calibrate_noise(cfg, budget=(0.5, 0.5, 0.5))


def test_calibrated_collection_hits_target_with_reported_estimator():
    # the same estimator the scenario reports, applied to expected counts
    cfg = load_preset("fig3b")
    exp = expected_histograms(cfg)
    angle = next(iter(exp.signal))
    total = exp.signal[angle] + sum(exp.noise[s] for s in exp.noise)
    h = Histogram(exp.bin_width_ns, exp.origin_ns, total)
    cal = calibrate_noise(cfg)
    windows = [((a + b) / 2, b - a) for a, b in cfg.analysis.noise_windows_ns]
    snr = estimate_snr(h, (cal["window_center_ns"], cfg.analysis.signal_window_ns), windows)
    assert snr.value == pytest.approx(9.0, rel=1e-9)
    with pytest.raises(ValueError, match="unreachable"):
        calibrate_noise(cfg, target_snr=1e6)


def test_errors_carry_scenario_context(tmp_path):
    cfg = with_overrides(load_preset("fig3b"), {"memory.calibration": str(tmp_path / "missing.json")})
    with pytest.raises(RuntimeError, match="fig3b"):
        run(cfg)


def test_reproduce_isolates_perturbed_calibration(tmp_path):
    base = reproduce_all(presets=("fig3b",))
    doc = load_calibration().to_dict()
    for c in doc["combs"]:
        if c["storage_time_ns"] == 100.0:
            c["peak_depth"] *= 3.0
    bad = tmp_path / "perturbed.json"
    bad.write_text(json.dumps(doc))
    pert = reproduce_all(presets=("fig3b",), calibration_path=str(bad))
    assert all(r.passed for r in base)
    by_q = {(r.source, r.quantity): r for r in pert}
    assert not by_q[("memory", "efficiency_100ns")].passed
    for r0 in base:
        if not r0.quantity.endswith("_100ns"):
            assert by_q[(r0.source, r0.quantity)] == r0


def test_reproduce_reports_broken_preset_as_row(tmp_path):
    bad = tmp_path / "c.json"
    bad.write_text("{}")
    rows = reproduce_all(presets=("fig3b",), calibration_path=str(bad))
    assert [(r.source, r.quantity, r.passed) for r in rows] == [("memory", "calibration", False), ("fig3b", "run", False)]
