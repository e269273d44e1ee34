#!/usr/bin/env python3
"""Run every bundled scenario and summarize the verdicts.

Usage: python scripts/run_all.py [OUT_DIR] [--workers K]
"""

import argparse
import sys
from pathlib import Path

from nonlocal_spectra.config import parse_scenarios
from nonlocal_spectra.runner import run_many

SCENARIO_DIR = Path(__file__).parent / "scenarios"


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out", nargs="?", default="out")
    parser.add_argument("--workers", type=int, default=2)
    args = parser.parse_args()

    scenarios = []
    for path in sorted(SCENARIO_DIR.glob("*.toml")):
        scenarios.extend(parse_scenarios(path))
    reports = run_many(scenarios, out_dir=args.out, workers=args.workers)

    failed = 0
    for report in reports:
        status = "FAIL" if report.failed else "ok"
        failed += report.failed
        print(f"{status:4s} {report.config.name:32s} [{report.wall_clock:6.2f}s]")
        for name, passed in report.verdicts:
            print(f"     {'PASS' if passed else 'FAIL'}  {name}")
    print(f"\n{len(reports) - failed}/{len(reports)} scenarios clean; outputs in {args.out}/")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
