"""Command line front end: ``pdcsim <subcommand> [--config PATH] [--out DIR] ...``.

Exit status: 0 on success, 1 when an inner module raises, 2 for a bad
config, override or argument, 3 when ``report --strict`` sees a failing check.
"""

from __future__ import annotations

import argparse
import sys
import traceback
from pathlib import Path

from . import io, pipeline
from .config import ConfigError, load_config

SUBCOMMANDS = ("shg", "design", "jsa", "budget", "simulate", "report")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="TOML run config (default: shipped reference device)")
    common.add_argument("--out", type=Path, default=None, help="output directory (default: config output_directory)")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="K=V",
                        help="override a config value, e.g. --set device.temperature_c=30 (repeatable)")
    common.add_argument("--seed", type=int, default=None, help="reseed experiments: experiment i gets N + i")
    common.add_argument("--quiet", action="store_true", help="no summary on stdout")

    parser = argparse.ArgumentParser(prog="pdcsim", description="Type-II PDC waveguide source model")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("shg", parents=[common], help="SHG tuning curve, peak and FWHM")
    sub.add_parser("design", parents=[common], help="degeneracy and poling-period solve")
    sub.add_parser("jsa", parents=[common], help="joint spectrum, marginals, Schmidt modes, coherence time")
    sub.add_parser("budget", parents=[common], help="loss budget and predicted heralding")
    sim = sub.add_parser("simulate", parents=[common], help="Monte Carlo counting experiments")
    sim.add_argument("--experiment", action="append", default=[], help="run only this experiment (repeatable)")
    sim.add_argument("--workers", type=int, default=1, help="threads for Monte Carlo blocks")
    rep = sub.add_parser("report", parents=[common], help="all figures of merit against reference values")
    rep.add_argument("--workers", type=int, default=1, help="threads for Monte Carlo blocks")
    rep.add_argument("--strict", action="store_true", help="exit 3 if any check fails")
    return parser


def _echo(args, text: str):
    if not args.quiet:
        print(text)


def _summary(args, title: str, values: dict):
    if args.quiet:
        return
    print(f"[{title}]")
    for key, value in values.items():
        if isinstance(value, float):
            print(f"  {key:<40s} {value:.6g}")
        else:
            print(f"  {key:<40s} {value}")


def _cmd_shg(args, cfg, out: Path) -> int:
    summary, curve = pipeline.shg_stage(cfg)
    io.write_tuning_curve(out / "shg_tuning.csv", curve)
    io.write_json(out / "shg.json", summary)
    _summary(args, "shg", summary)
    return 0


def _cmd_design(args, cfg, out: Path) -> int:
    summary = pipeline.design_stage(cfg)
    io.write_json(out / "design.json", summary)
    _summary(args, "design", summary)
    return 0


def _cmd_jsa(args, cfg, out: Path) -> int:
    summary, artifacts = pipeline.jsa_stage(cfg)
    for name, obj in artifacts.items():
        if name.startswith("jsi"):
            io.write_jsi(out / f"{name}.csv", obj)
        elif name.startswith("marginal"):
            io.write_spectrum(out / f"{name}.csv", obj)
        else:
            io.write_schmidt(out / f"{name}.csv", obj)
    io.write_json(out / "jsa.json", summary)
    _summary(args, "jsa", summary)
    return 0


def _cmd_budget(args, cfg, out: Path) -> int:
    summary = pipeline.budget_stage(cfg)
    io.write_json(out / "budget.json", summary)
    _summary(args, "budget", summary)
    return 0


def _cmd_simulate(args, cfg, out: Path) -> int:
    summaries, records = pipeline.simulate_stage(cfg, args.experiment, workers=args.workers)
    for name, record in records.items():
        io.write_count_record(out / f"counts_{name}.json", record)
        _summary(args, f"simulate {name}", summaries[name])
    io.write_json(out / "simulate.json", summaries)
    return 0


def _cmd_report(args, cfg, out: Path) -> int:
    doc = pipeline.report(cfg, workers=args.workers)
    io.write_json(out / "report.json", doc)
    if not args.quiet:
        for c in doc["checks"]:
            status = c["status"].upper()
            if c["status"] == "skipped":
                print(f"{status:<8s} {c['quantity']}: {c['reason']}")
            else:
                print(f"{status:<8s} {c['quantity']} = {c['value']:.6g} (reference {c['reference']:.6g}, {c['kind']})")
        for stage, err in doc["stage_errors"].items():
            print(f"ERROR    stage {stage}: {err}")
        s = doc["summary"]
        print(f"{s['pass']} passed, {s['fail']} failed, {s['skipped']} skipped")
    if args.strict and doc["summary"]["fail"]:
        return 3
    return 0


COMMANDS = {
    "shg": _cmd_shg,
    "design": _cmd_design,
    "jsa": _cmd_jsa,
    "budget": _cmd_budget,
    "simulate": _cmd_simulate,
    "report": _cmd_report,
}


def _provenance(exc: BaseException) -> str:
    """Deepest package module on the traceback."""
    module = "pdcsim"
    for frame, _ in traceback.walk_tb(exc.__traceback__):
        name = frame.f_globals.get("__name__", "")
        if name.startswith("pdcsim"):
            module = name
    return module


def run(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.overrides, args.seed)
        out = args.out if args.out is not None else cfg.output_directory
        out.mkdir(parents=True, exist_ok=True)
        status = COMMANDS[args.command](args, cfg, out)
        _echo(args, f"outputs in {out}")
        return status
    except (ConfigError, FileNotFoundError, PermissionError) as exc:
        print(f"pdcsim: config error [{_provenance(exc)}]: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"pdcsim: error [{_provenance(exc)}]: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run())
