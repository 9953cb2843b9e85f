"""``sim`` command line: run presets, calibrate, fit histograms, dump transfer functions."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .analysis import estimate_g2, fit_exponential, fit_gaussian_peak
from .calibration import DEFAULT_TARGETS, CalibrationError, calibrate_material
from .detection import read_histogram
from .memory import memory_transfer_function
from .optics import filter_chain_transfer
from .scenario.config import PRESET_NAMES, ConfigError, load_preset, parse_config
from .scenario.reproduce import format_table, reproduce_all, rows_to_csv, rows_to_json
from .scenario.runner import calibrate_noise, load_calibration, output_root, run
from .spectral import impulse_response, memory_grid


def _load(config: str):
    if config in PRESET_NAMES and not Path(config).exists():
        return load_preset(config)
    return parse_config(config)


def _print_json(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True, default=float))


def cmd_run(args) -> int:
    cfg = _load(args.config)
    art = run(cfg, seed=args.seed)
    out = Path(args.out) if args.out else output_root() / cfg.name
    art.write(out)
    for c in art.checks:
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['quantity']}: {c['value']} (target {c['target']})")
    print(f"artifacts written to {out}")
    if args.check and not art.passed:
        return 1
    return 0


def _parse_target(text: str) -> tuple[float, float]:
    t, eta = text.split(":")
    return float(t), float(eta)


def cmd_calibrate(args) -> int:
    if args.noise:
        cfg = _load(args.noise)
        _print_json(calibrate_noise(cfg, target_snr=args.snr))
        return 0
    targets = [_parse_target(t) for t in args.target] if args.target else DEFAULT_TARGETS
    try:
        result = calibrate_material(targets, shared_depth=args.shared_depth)
    except CalibrationError as exc:
        print(f"calibration failed: {exc}", file=sys.stderr)
        _print_json(exc.report)
        return 1
    text = json.dumps(result.to_dict(), indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    for c in result.combs:
        print(f"T = {c.storage_time_ns:g} ns  F = {c.finesse:.3f}  d = {c.peak_depth:.4g}  eta = {c.efficiency:.4f}"
              f"  (target {c.target_efficiency:g})")
    if args.out:
        print(f"written to {args.out}")
    return 0


def cmd_fit(args) -> int:
    sidecar = args.sidecar
    if sidecar is None:
        guess = Path(args.csv).with_suffix(".json")
        sidecar = str(guess) if guess.exists() else None
    h = read_histogram(args.csv, sidecar)
    if args.model == "exponential":
        res = fit_exponential(h, args.t_min, args.t_max).to_dict()
    elif args.model == "gaussian":
        if args.window is None:
            raise SystemExit("--window LO HI is required for a gaussian fit")
        res = fit_gaussian_peak(h, tuple(args.window)).to_dict()
    else:
        if args.period is None:
            raise SystemExit("--period is required for g2")
        res = estimate_g2(h, args.period).to_dict()
    _print_json(res)
    return 0


def _write_rows(rows, header: str, out) -> None:
    fmt = ",".join(["%.6f"] + ["%.9g"] * (rows.shape[1] - 1))
    target = out if out else sys.stdout
    np.savetxt(target, rows, delimiter=",", header=header, comments="", fmt=fmt)
    if out:
        print(f"{len(rows)} rows written to {out}")


def cmd_transfer_dump(args) -> int:
    step = max(1, args.stride)
    if args.what == "filters":
        cfg = _load(args.config)
        det = np.linspace(-args.span_mhz / 2e3, args.span_mhz / 2e3, args.points)
        t = filter_chain_transfer(det, cfg.filters)
        rows = np.column_stack([det, np.abs(t) ** 2, np.angle(t)])[::step]
        _write_rows(rows, "detuning_ghz,intensity_transmission,phase_rad", args.out)
        return 0
    calib = load_calibration(args.calibration)
    prof = calib.comb_for(args.storage_time).profile(memory_grid())
    H = memory_transfer_function(prof)
    grid = prof.grid
    if args.what == "impulse":
        h = impulse_response(H)
        t_ns = grid.signed_times * 1e9
        keep = (t_ns >= -5) & (t_ns <= args.window_ns)
        order = np.argsort(t_ns[keep])
        rows = np.column_stack([t_ns[keep][order], h.real[keep][order], h.imag[keep][order]])[::step]
        _write_rows(rows, "time_ns,re_h_per_s,im_h_per_s", args.out)
        return 0
    nu = grid.detunings / 1e6
    sel = np.abs(nu) <= args.span_mhz / 2
    a = H.amplitude[sel]
    rows = np.column_stack([nu[sel], prof.real_depth[sel], prof.depth.imag[sel], np.abs(a) ** 2, np.angle(a)])[::step]
    _write_rows(rows, "detuning_mhz,re_optical_depth,im_optical_depth,intensity_transmission,phase_rad", args.out)
    return 0


def cmd_reproduce_all(args) -> int:
    rows = reproduce_all(calibration_path=args.calibration, out_dir=args.out)
    print(format_table(rows))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.json").write_text(rows_to_json(rows))
        (out / "summary.csv").write_text(rows_to_csv(rows))
    return 0 if all(r.passed for r in rows) else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sim", description="Quantum-dot photon storage in a frequency-comb memory")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario config or preset name")
    p.add_argument("config", help=f"JSON config path or one of {', '.join(PRESET_NAMES)}")
    p.add_argument("--seed", type=int)
    p.add_argument("--check", action="store_true", help="exit 1 when any target is missed")
    p.add_argument("--out", help="artifact directory (default: $QDAFC_OUTPUT_ROOT/<name>)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("calibrate", help="fit comb parameters to target efficiencies")
    p.add_argument("--target", action="append", metavar="T_NS:ETA", help="storage time and efficiency, repeatable")
    p.add_argument("--shared-depth", action="store_true", help="one peak depth for every storage time")
    p.add_argument("--out", help="write the calibration JSON here")
    p.add_argument("--noise", metavar="CONFIG", help="instead calibrate noise rates and collection for this scenario")
    p.add_argument("--snr", type=float, default=9.0, help="target SNR for --noise")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("fit", help="fit a histogram CSV")
    p.add_argument("csv")
    p.add_argument("--sidecar", help="JSON sidecar (default: same stem .json if present)")
    p.add_argument("--model", choices=("exponential", "gaussian", "g2"), default="exponential")
    p.add_argument("--t-min", type=float, default=0.0)
    p.add_argument("--t-max", type=float)
    p.add_argument("--window", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--period", type=float, help="pulse period for g2")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("transfer-dump", help="write a transfer function or impulse response as CSV")
    p.add_argument("what", nargs="?", choices=("memory", "impulse", "filters"), default="memory")
    p.add_argument("--storage-time", type=float, default=40.0, help="calibrated comb to dump (memory, impulse)")
    p.add_argument("--calibration")
    p.add_argument("--config", default="fig3b", help="scenario whose filter chain to dump (filters)")
    p.add_argument("--span-mhz", type=float, default=600.0)
    p.add_argument("--points", type=int, default=20001, help="samples across the span (filters)")
    p.add_argument("--window-ns", type=float, default=200.0, help="impulse response length")
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_transfer_dump)

    p = sub.add_parser("reproduce-all", help="run every preset and print the summary table")
    p.add_argument("--calibration")
    p.add_argument("--out", help="directory for artifacts and summary.json/csv")
    p.set_defaults(func=cmd_reproduce_all)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
