"""Command line: ``qconnlab run | validate | list-experiments``."""

from __future__ import annotations

import argparse
import datetime as dt
import json
import logging
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .artifacts import write_csv, write_report, write_svg
from .config import EXPERIMENTS, load_config, resolve, validate_config
from .errors import ConfigInvalid, FileUnreadable
from .experiments import run_experiment

EXIT_OK = 0
EXIT_TOLERANCE = 2
EXIT_CONFIG = 3

def _now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


def run_config(raw: dict, output: str | Path | None = None, seed: int | None = None) -> tuple[int, dict]:
    """Run one experiment and write its artifacts; returns ``(exit status, report)``.

    Raises :class:`ConfigInvalid` before anything is written if the config is
    malformed.
    """
    raw = dict(raw)
    if seed is not None:
        raw["seed"] = seed
    cfg = resolve(raw)
    out = Path(output or cfg.get("output_dir") or Path("results") / cfg["experiment"])
    out.mkdir(parents=True, exist_ok=True)
    started = _now()
    t0 = time.perf_counter()
    outcome = run_experiment(cfg)
    elapsed = time.perf_counter() - t0
    write_csv(outcome, out / "results.csv")
    write_svg(outcome.plot, out / "plot.svg")
    report = {
        "experiment": cfg["experiment"],
        "config": raw,
        "resolved_config": cfg,
        "seed": cfg["seed"],
        "columns": list(outcome.columns),
        "checks": [c.to_dict() for c in outcome.checks],
        "passed": outcome.passed,
        "details": outcome.details,
        "started_at": started,
        "finished_at": _now(),
        "elapsed_seconds": elapsed,
        "environment": {"qconnlab": __version__, "numpy": np.__version__, "python": platform.python_version()},
    }
    write_report(report, out / "report.json")
    return (EXIT_OK if outcome.passed else EXIT_TOLERANCE), report


def _cmd_run(args) -> int:
    try:
        raw = load_config(args.config)
        status, report = run_config(raw, args.output, args.seed)
    except (ConfigInvalid, FileUnreadable) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not args.quiet:
        for c in report["checks"]:
            mark = "PASS" if c["passed"] else "FAIL"
            op = "<=" if c["sense"] == "max" else ">="
            print(f"{mark} {c['name']}: {c['value']} {op} {c['tolerance']} [{c['invariant']}]")
        print(f"{report['experiment']}: {'passed' if report['passed'] else 'tolerance failure'}")
    return status


def _cmd_validate(args) -> int:
    try:
        raw = load_config(args.config)
    except (ConfigInvalid, FileUnreadable) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    issues = validate_config(raw)
    if args.json:
        print(json.dumps([i.to_dict() for i in issues], indent=2))
    elif not issues:
        if not args.quiet:
            print(f"{args.config}: ok")
    else:
        for i in issues:
            print(i)
    return EXIT_CONFIG if issues else EXIT_OK


def _cmd_list(args) -> int:
    for name, spec in EXPERIMENTS.items():
        if args.quiet:
            print(name)
            continue
        opt = ", ".join(f"{k}={v}" for k, v in spec.optional.items())
        print(f"{name}\n    {spec.description}\n    required: {', '.join(spec.required)}")
        if opt:
            print(f"    optional: {opt}")
        print(f"    columns: {', '.join(spec.columns)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qconnlab", description="Run q-connection experiments.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="verb", required=True)

    r = sub.add_parser("run", help="run one experiment config")
    r.add_argument("--config", required=True, help="YAML or JSON config file")
    r.add_argument("--output", help="output directory (overrides output_dir)")
    r.add_argument("--seed", type=int, help="override the config seed")
    r.add_argument("--quiet", action="store_true")
    r.set_defaults(func=_cmd_run)

    v = sub.add_parser("validate", help="schema-check a config without running it")
    v.add_argument("--config", required=True)
    v.add_argument("--json", action="store_true", help="print issues as JSON")
    v.add_argument("--quiet", action="store_true")
    v.set_defaults(func=_cmd_validate)

    ls = sub.add_parser("list-experiments", help="list experiments and their fields")
    ls.add_argument("--quiet", action="store_true")
    ls.set_defaults(func=_cmd_list)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
