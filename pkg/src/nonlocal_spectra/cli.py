"""Command line entry point.

    nonlocal-spectra run <config.toml> [--strict] [--out DIR] [--workers K]
    nonlocal-spectra validate <config.toml>

``run`` executes every scenario in the file (concurrently up to the worker
limit), writing per-scenario CSV tables, text reports, and a canonical echo
of each resolved scenario.  With --strict the exit code is nonzero whenever
any verdict line is FAIL.  The environment variable NONLOCAL_SPECTRA_SEED
overrides the config seed.
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, parse_scenarios
from .errors import ScenarioError
from .runner import run_many


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="nonlocal-spectra", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute the scenarios in a config file")
    p_run.add_argument("config")
    p_run.add_argument("--strict", action="store_true", help="nonzero exit on any FAIL verdict")
    p_run.add_argument("--out", default=".", help="output directory (default: cwd)")
    p_run.add_argument("--workers", type=int, default=1, help="concurrent scenario limit")

    p_val = sub.add_parser("validate", help="parse and validate a config file")
    p_val.add_argument("config")

    args = parser.parse_args(argv)

    try:
        scenarios = parse_scenarios(args.config)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    if args.command == "validate":
        for cfg in scenarios:
            print(f"ok: {cfg.name} ({cfg.kind})")
        return 0

    try:
        reports = run_many(scenarios, out_dir=args.out, workers=args.workers)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    failed = False
    for report in reports:
        status = "FAIL" if report.failed else "ok"
        failed = failed or report.failed
        print(
            f"{status}: {report.config.name} ({report.config.kind}) "
            f"[{report.wall_clock:.2f}s] -> {report.config.output['csv']}"
        )
        for name, passed in report.verdicts:
            print(f"    {name}: {'PASS' if passed else 'FAIL'}")
    return 1 if (failed and args.strict) else 0


if __name__ == "__main__":
    raise SystemExit(main())
