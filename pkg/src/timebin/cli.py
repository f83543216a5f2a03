"""Command-line front end: simulate -> analyze -> fringe/tomo -> report.

Run configs are flat ``key = value`` text files with units spelled out in
the key names (``rep_rate_hz``, ``duration_s``, ...).  Every command
writes a manifest next to its outputs with a config echo, RNG seeds and
content checksums, so each figure is reproducible from its JSON alone.

Exit codes: 0 success, 2 usage or config error, 3 data error,
4 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time

import numpy as np

from . import __version__, analysis, streams, tomography
from .analysis import FringeScan, GateConfig, car, fit_fringe, klyshko
from .simulate import (CH_IDLER, CH_SIGNAL, DEFAULT_GATE_WIDTH, TAG_DTYPE,
                       ExperimentConfig, iter_simulate,
                       iter_simulate_single_bin)
from .streams import StreamFormatError

__all__ = ["main", "load_config", "ConfigError", "DataError", "ConvergenceError"]

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NONCONVERGED = 4


class ConfigError(Exception):
    pass


class DataError(Exception):
    pass


class ConvergenceError(Exception):
    pass


_CONFIG_KEYS = {
    "rep_rate_hz": ("rep_rate", float),
    "bin_delay_s": ("bin_delay", float),
    "mean_pairs_per_pulse": ("mean_pairs_per_pulse", float),
    "pump_power_w": ("pump_power", float),
    "pair_yield_per_watt": ("pair_yield_per_watt", float),
    "eta_signal": ("eta_signal", float),
    "eta_idler": ("eta_idler", float),
    "dark_rate_signal_hz": ("dark_rate_signal", float),
    "dark_rate_idler_hz": ("dark_rate_idler", float),
    "phi_p_rad": ("phi_p", float),
    "phi_s_rad": ("phi_s", float),
    "phi_i_rad": ("phi_i", float),
    "interference_visibility": ("interference_visibility", float),
    "duration_s": ("duration", float),
    "rng_seed": ("rng_seed", int),
    "jitter_sigma_s": ("jitter_sigma", float),
    "detection_delay_s": ("detection_delay", float),
}

_REQUIRED_KEYS = ("rep_rate_hz", "duration_s", "mean_pairs_per_pulse")


def load_config(path) -> ExperimentConfig:
    """Parse a key = value run config; unknown or missing keys are fatal."""
    values = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown config field '{key}'")
        field_name, conv = _CONFIG_KEYS[key]
        try:
            values[field_name] = conv(val.strip())
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for '{key}': {exc}") from exc
    for key in _REQUIRED_KEYS:
        field_name = _CONFIG_KEYS[key][0]
        if field_name not in values:
            raise ConfigError(f"{path}: missing required config field '{key}'")
    config = ExperimentConfig(**values)
    try:
        config.validate()
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _write_manifest(out_path, config_echo, inputs, outputs, seed, t_start):
    manifest = {
        "software_version": __version__,
        "format_version": streams.FORMAT_VERSION,
        "config": config_echo,
        "rng_seed": seed,
        "inputs": [str(p) for p in inputs],
        "outputs": {str(p): _sha256(p) for p in outputs},
        "wall_clock_s": time.monotonic() - t_start,
    }
    path = str(out_path) + ".manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2)
    return path


def _cmd_simulate(args) -> int:
    t0 = time.monotonic()
    config = load_config(args.config)
    if args.seed is not None:
        config = ExperimentConfig(**{**config.to_dict(), "rng_seed": args.seed})
    echo = config.to_dict()
    echo["mode"] = args.mode
    if args.mode == "time-bin":
        chunks = iter_simulate(config)
    else:
        chunks = iter_simulate_single_bin(config)
    if args.format == "csv":
        tags = np.concatenate(list(chunks)) if config.duration else np.empty(0, TAG_DTYPE)
        streams.write_tags_csv(args.out, tags)
        n = tags.size
    else:
        n = streams.write_tags(args.out, chunks, config_echo=echo)
    _write_manifest(args.out, echo, [args.config], [args.out], config.rng_seed, t0)
    print(f"wrote {n} tags to {args.out}")
    return 0


def _gates_from_echo(echo, gate_width):
    config = ExperimentConfig(**{k: v for k, v in echo.items() if k != "mode"})
    if echo.get("mode") == "single-bin":
        return GateConfig.single_bin(config, gate_width), config
    return GateConfig.time_bin(config, gate_width), config


def _write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(str(v) for v in row) + "\n")


def _cmd_analyze(args) -> int:
    t0 = time.monotonic()
    try:
        it = streams.iter_read_tags(args.input)
        header = next(it)
        echo = header.get("config", {})
        if not echo:
            raise DataError(f"{args.input}: header carries no config echo")
        gates, config = _gates_from_echo(echo, args.gate_width_s)
        result = analysis.analyze_stream(it, gates, hist_bin=args.hist_bin_s)
    except StreamFormatError as exc:
        raise DataError(f"{args.input}: {exc}") from exc
    except ValueError as exc:
        raise DataError(f"{args.input}: {exc}") from exc

    rates = result.rate_report()
    report = {
        "format_version": streams.FORMAT_VERSION,
        "config": echo,
        "rates": rates.to_dict(),
        "car": car(rates).to_dict() if min(rates.n_signal, rates.n_idler,
                                           rates.n_coinc) > 0 else None,
        "joint_slot_counts": result.joint.tolist(),
        "neighbor_joint_counts": result.neighbor_joint.tolist(),
        "gated_slot_counts": {"signal": result.gated_signal.tolist(),
                              "idler": result.gated_idler.tolist()},
        "delay_counts": {str(k): v for k, v
                         in result.coincidence_histogram().delay_counts.items()},
        "dropped_pre_trigger": result.dropped_pre_trigger,
    }
    if rates.n_signal > 0 and rates.n_idler > 0:
        eta_s, eta_i = klyshko(rates)
        report["klyshko"] = {"signal": eta_s.to_dict(), "idler": eta_i.to_dict()}
    with open(args.out, "w") as fh:
        json.dump(report, fh, indent=2)

    base = args.out[:-5] if args.out.endswith(".json") else args.out
    outputs = [args.out]
    for ch, name in ((CH_SIGNAL, "signal"), (CH_IDLER, "idler")):
        hist = result.histograms.get(ch)
        if hist is None:
            continue
        path = f"{base}.singles_{name}.csv"
        rows = [(i * result.hist_bin, int(c), float(np.sqrt(c)))
                for i, c in enumerate(hist) if c]
        _write_csv(path, "slot_or_phase,count,error", rows)
        outputs.append(path)
    path = f"{base}.delays.csv"
    rows = [(d, c, float(np.sqrt(c))) for d, c
            in sorted(result.coincidence_histogram().delay_counts.items())]
    _write_csv(path, "slot_or_phase,count,error", rows)
    outputs.append(path)
    _write_manifest(args.out, echo, [args.input], outputs, echo.get("rng_seed"), t0)
    print(f"analyzed {args.input}: {rates.n_coinc} coincidences in {rates.duration:.3g} s")
    return 0


def _load_report(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read report {path}: {exc}") from exc


def _cmd_fringe(args) -> int:
    t0 = time.monotonic()
    points = []
    for spec_arg in args.points:
        phase_str, _, path = spec_arg.partition(":")
        if not path:
            raise ConfigError(f"fringe point {spec_arg!r} must look like PHASE_RAD:REPORT.json")
        try:
            phase = float(phase_str)
        except ValueError as exc:
            raise ConfigError(f"bad phase in {spec_arg!r}: {exc}") from exc
        report = _load_report(path)
        counts = report["rates"]["counts"]["central"]
        duration = report["rates"]["duration_s"]
        points.append((phase, counts, duration))
    if len(points) < 5:
        raise ConfigError(f"fringe fit needs at least 5 points, got {len(points)}")
    scan = FringeScan.from_points(points)
    try:
        fit = fit_fringe(scan)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    out = {"fit": fit.to_dict(),
           "points": [{"phase_rad": p, "count": c, "integration_s": t}
                      for p, c, t in points]}
    with open(args.out, "w") as fh:
        json.dump(out, fh, indent=2)
    base = args.out[:-5] if args.out.endswith(".json") else args.out
    csv_path = base + ".fringe.csv"
    _write_csv(csv_path, "slot_or_phase,count,error",
               [(p, c, float(np.sqrt(c))) for p, c, t in points])
    _write_manifest(args.out, {}, [p.partition(":")[2] for p in args.points],
                    [args.out, csv_path], None, t0)
    print(f"fringe visibility {fit.visibility.value:.4f} +- {fit.visibility.error:.4f}")
    return 0


def _cmd_tomo(args) -> int:
    t0 = time.monotonic()
    setting_counts = {}
    inputs = []
    for spec_arg in args.settings:
        dials, _, path = spec_arg.partition(":")
        try:
            ds, di = (int(x) for x in dials.split(","))
        except ValueError as exc:
            raise ConfigError(f"setting {spec_arg!r} must look like DS,DI:REPORT.json") from exc
        report = _load_report(path)
        joint = np.array(report["joint_slot_counts"])
        setting_counts[(ds, di)] = joint
        inputs.append(path)
    missing = [s for s in tomography.SETTINGS if s not in setting_counts]
    if missing:
        raise ConfigError(f"missing phase settings {missing}")
    record = tomography.counts_from_phase_settings(
        setting_counts, provenance=f"runs: {', '.join(inputs)}")
    result = tomography.bootstrap_errors(record, n_replicas=args.replicas,
                                         seed=args.seed or 0,
                                         max_iter=args.max_iter)
    with open(args.out, "w") as fh:
        fh.write(result.to_json())
    base = args.out[:-5] if args.out.endswith(".json") else args.out
    csv_path = base + ".rho.csv"
    rows = []
    for part, m in (("re", result.rho.matrix.real), ("im", result.rho.matrix.imag)):
        for row in m:
            rows.append([part] + [repr(v) for v in row])
    _write_csv(csv_path, "part,c00,c01,c10,c11", rows)
    _write_manifest(args.out, {}, inputs, [args.out, csv_path], args.seed, t0)
    print(f"concurrence {result.concurrence:.4f}, fidelity {result.fidelity:.4f}, "
          f"CHSH [{result.chsh_lower:.3f}, {result.chsh_upper:.3f}]")
    if not result.converged:
        raise ConvergenceError("maximum-likelihood fit did not converge")
    return 0


def _cmd_report(args) -> int:
    summary = {"reports": []}
    for path in args.reports:
        data = _load_report(path)
        summary["reports"].append({"path": str(path), "content": data})
    with open(args.out, "w") as fh:
        json.dump(summary, fh, indent=2)
    print(f"combined {len(args.reports)} reports into {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="timebin", description="time-bin photon-pair simulation and analysis")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a time-tag stream")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=["single-bin", "time-bin"], default="time-bin")
    p.add_argument("--seed", type=int, default=None, help="override the config RNG seed")
    p.add_argument("--format", choices=["json", "csv"], default="json",
                   help="csv selects the debug tag format")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("analyze", help="histogram and rate analysis of a tag stream")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--gate-width-s", type=float, default=DEFAULT_GATE_WIDTH)
    p.add_argument("--hist-bin-s", type=float, default=10e-12)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("fringe", help="sinusoidal visibility fit over analyzed runs")
    p.add_argument("points", nargs="+", metavar="PHASE_RAD:REPORT.json")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fringe)

    p = sub.add_parser("tomo", help="maximum-likelihood tomography from four settings")
    p.add_argument("settings", nargs="+", metavar="DS,DI:REPORT.json")
    p.add_argument("--out", required=True)
    p.add_argument("--replicas", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iter", type=int, default=2000)
    p.set_defaults(func=_cmd_tomo)

    p = sub.add_parser("report", help="bundle analysis outputs into one summary")
    p.add_argument("reports", nargs="+")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED


if __name__ == "__main__":
    sys.exit(main())
