"""``h2supply`` command line: batch case runs and plot-data export."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import tempfile
from dataclasses import replace
from pathlib import Path

from .cases import BACKENDS, ConfigError, RunConfig, emit_plots_csv, exit_code, parse_tolerances, run_config

log = logging.getLogger("h2supply")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="h2supply", description="Hydrogen supply-chain design studies")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="solve one case config across its years and scales")
    run.add_argument("--config", required=True, help="JSON run config")
    run.add_argument("--out-dir", default="results")
    run.add_argument("--backend", choices=BACKENDS, help="override the config backend")
    run.add_argument("--reduction", help="override the reduction policy, e.g. first_hours:168")
    run.add_argument("--tolerances", help="key=value list or JSON object, e.g. gap_tol=1e-6,feas_tol=1e-7")
    run.add_argument("--seed-check", action="store_true",
                     help="solve everything twice and fail unless the reports match byte for byte")
    run.add_argument("--jobs", type=int, default=1, help="cells solved in parallel")

    plots = sub.add_parser("plots-csv", help="gather report.json files into one long-format CSV")
    plots.add_argument("results_dir")
    plots.add_argument("--out", help="output CSV (default <results_dir>/plots.csv)")
    return p


def _reports_bytes(root: Path) -> dict[str, bytes]:
    return {str(f.relative_to(root)): f.read_bytes() for f in sorted(root.rglob("report.json"))}


def _run(args) -> int:
    config = RunConfig.load(args.config)
    changes = {}
    if args.backend:
        changes["backend"] = args.backend
    if args.reduction:
        changes["reduction"] = args.reduction
    if args.tolerances:
        changes["tolerances"] = {**config.tolerances, **parse_tolerances(args.tolerances)}
    if changes:
        config = replace(config, **changes)
    if args.jobs < 1:
        raise ConfigError("--jobs must be at least 1")
    out = Path(args.out_dir)
    reports = run_config(config, out, jobs=args.jobs)
    if args.seed_check:
        with tempfile.TemporaryDirectory() as tmp:
            run_config(config, tmp, jobs=args.jobs)
            first = {k: v for k, v in _reports_bytes(out).items() if k.startswith(config.case + "/")}
            second = _reports_bytes(Path(tmp))
            if first != second:
                diff = sorted(k for k in first.keys() | second.keys() if first.get(k) != second.get(k))
                print(f"seed check failed: reports differ in {diff}", file=sys.stderr)
                return 1
        print("seed check passed: repeated run reproduced every report byte for byte")
    for rep in reports:
        statuses = ", ".join(f"{r['label']}={r['status']}" for r in rep["runs"])
        print(f"{rep['case']} {rep['year']} {rep['scale_kt']:g}kt: cheapest={rep['cheapest']} [{statuses}]")
    return exit_code(reports)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            return _run(args)
        path = emit_plots_csv(args.results_dir, args.out)
        print(path)
        return 0
    except (ConfigError, FileNotFoundError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
