"""Command-line front end: ``tsnsim {presets,validate,run,sweep,compare}``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import scenario
from .engine import SimulationError, parse_duration
from .frames import ConfigError
from .metrics import FAIL, emit_report, emit_sweep_report

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

OUT_ENV = "TSNSIM_OUT"
DEFAULT_OUT = "tsnsim-results"


def _add_source_args(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=scenario.PRESETS)
    src.add_argument("--config", metavar="PATH", help="YAML scenario file")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                   help="dotted config key, e.g. shaping.cbs.5=0.3 (repeatable)")
    p.add_argument("--seed", type=int)
    p.add_argument("--horizon", help="simulated time, e.g. 5s or 500ms")


def _add_out_arg(p):
    p.add_argument("--out", metavar="DIR",
                   help=f"report directory (default: ${OUT_ENV}/<name> or {DEFAULT_OUT}/<name>)")


def build_parser():
    parser = argparse.ArgumentParser(prog="tsnsim",
                                     description="Smart-factory TSN network simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("presets", help="list presets or print one as YAML")
    p.add_argument("action", choices=["list", "expand"])
    p.add_argument("name", nargs="?", choices=scenario.PRESETS)
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")

    p = sub.add_parser("validate", help="check a scenario without running it")
    _add_source_args(p)

    p = sub.add_parser("run", help="simulate one scenario and write reports")
    _add_source_args(p)
    _add_out_arg(p)
    p.add_argument("--check", action="store_true",
                   help="exit 1 if any requirements-matrix cell fails")
    p.add_argument("--format", choices=["rows", "structured", "both"], default="both")

    p = sub.add_parser("sweep", help="one run per parameter value, merged into a series")
    _add_source_args(p)
    _add_out_arg(p)
    p.add_argument("--param", required=True, choices=sorted(scenario.SWEEPABLE))
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")

    p = sub.add_parser("compare", help="diff two report.json files (or report directories)")
    p.add_argument("left")
    p.add_argument("right")
    return parser


def _overrides(args):
    out = {}
    for text in args.override:
        key, value = scenario.parse_override(text)
        out[key] = value
    if getattr(args, "seed", None) is not None:
        out["seed"] = args.seed
    if getattr(args, "horizon", None) is not None:
        try:
            out["horizon"] = parse_duration(args.horizon)
        except ValueError as exc:
            raise ConfigError(f"--horizon: {exc}") from None
    return out


def _config(args):
    return scenario.load_or_expand(args.preset, args.config, _overrides(args))


def _out_dir(args, name):
    if args.out:
        return args.out
    return os.path.join(os.environ.get(OUT_ENV) or DEFAULT_OUT, name)


def _fmt(v, digits=3):
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.{digits}f}"
    return str(v)


def print_summary(report, stream=None):
    stream = stream or sys.stdout
    print(f"scenario {report['scenario']}  seed {report['seed']}  "
          f"horizon {report['horizon_ns'] / 1e9:g} s  events {report['events']}", file=stream)
    print(f"{'application':<26}{'sent':>9}{'recv':>9}{'drop':>9}{'RDR%':>9}"
          f"{'mean ms':>11}{'max ms':>11}", file=stream)
    for row in report["apps"]:
        print(f"{row['app']:<26}{row['frames_sent']:>9}{row['frames_received']:>9}"
              f"{row['frames_dropped']:>9}{_fmt(row['rdr_percent'], 2):>9}"
              f"{_fmt(row['mean_delay_ms'], 4):>11}{_fmt(row['max_delay_ms'], 4):>11}",
              file=stream)
    print("requirements:", file=stream)
    for app, cells in report["requirements"].items():
        print(f"  {app:<24} RDR {cells['RDR']:<8} Delay {cells['Delay']}", file=stream)


def _load_report(path):
    if os.path.isdir(path):
        path = os.path.join(path, "report.json")
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def compare_reports(left, right):
    """Rows of ``(app, metric, left, right)`` for every metric that differs."""
    la = {r["app"]: r for r in left["apps"]}
    ra = {r["app"]: r for r in right["apps"]}
    diffs = []
    for app in list(la) + [a for a in ra if a not in la]:
        l, r = la.get(app, {}), ra.get(app, {})
        for key in ("rdr_percent", "mean_delay_ms", "max_delay_ms", "frames_received",
                    "frames_dropped"):
            if l.get(key) != r.get(key):
                diffs.append((app, key, l.get(key), r.get(key)))
    for app in sorted(set(left["requirements"]) | set(right["requirements"])):
        lc, rc = left["requirements"].get(app, {}), right["requirements"].get(app, {})
        for cell in ("RDR", "Delay"):
            if lc.get(cell) != rc.get(cell):
                diffs.append((app, f"requirement {cell}", lc.get(cell), rc.get(cell)))
    return diffs


def _parse_values(text):
    import yaml
    return [yaml.safe_load(v) for v in text.split(",") if v.strip()]


def cmd_presets(args):
    if args.action == "list":
        for name in scenario.PRESETS:
            print(f"{name:<10} {scenario.PRESET_HELP[name]}")
        return EXIT_OK
    if not args.name:
        raise ConfigError("presets expand needs a preset name")
    cfg = scenario.expand_preset(args.name, _overrides(args))
    sys.stdout.write(cfg.to_yaml())
    return EXIT_OK


def cmd_validate(args):
    cfg = _config(args)
    print(f"{cfg.name}: ok ({len(cfg.topology.switches)} switches, "
          f"{len(cfg.topology.hosts)} hosts)")
    return EXIT_OK


def cmd_run(args):
    cfg = _config(args)
    result = scenario.run(cfg)
    out = _out_dir(args, cfg.name)
    paths = emit_report(result.report, out, args.format)
    print_summary(result.report)
    print(f"reports: {', '.join(paths)}")
    if args.check:
        failed = [(a, c) for a, cells in result.report["requirements"].items()
                  for c, v in cells.items() if v == FAIL]
        if failed:
            print("requirement check failed: "
                  + ", ".join(f"{a} {c}" for a, c in failed), file=sys.stderr)
            return EXIT_CHECK_FAILED
    return EXIT_OK


def cmd_sweep(args):
    base = None if args.config is None else scenario.load_config(args.config)
    values = _parse_values(args.values)
    if not values:
        raise ConfigError("--values is empty")
    results = scenario.sweep(args.preset, args.param, values, _overrides(args), args.jobs,
                             config=base)
    name = args.preset or (base.name if base else "sweep")
    out = _out_dir(args, f"{name}-sweep-{args.param}")
    paths = emit_sweep_report(args.param, results, out)
    for value, report in results:
        print(f"--- {args.param} = {value}")
        print_summary(report)
    print(f"reports: {', '.join(paths)}")
    return EXIT_OK


def cmd_compare(args):
    try:
        left, right = _load_report(args.left), _load_report(args.right)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read report: {exc}") from None
    diffs = compare_reports(left, right)
    if not diffs:
        print("reports agree")
    for app, metric, l, r in diffs:
        print(f"{app:<26}{metric:<22}{_fmt(l, 4):>14}{_fmt(r, 4):>14}")
    return EXIT_OK


COMMANDS = {"presets": cmd_presets, "validate": cmd_validate, "run": cmd_run,
            "sweep": cmd_sweep, "compare": cmd_compare}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.verb](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationError as exc:
        print(f"runtime fault: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"runtime fault: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
