"""Run every built-in experiment and print one verdict line per report.

Usage: python3 scripts/run_all.py [--out runs] [--workers N]
"""
import argparse
import sys
import time
from pathlib import Path

from cidlab.experiments import builtin_config, list_experiments, run_experiment


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="runs", help="parent directory for artifacts")
    parser.add_argument("--workers", type=int, default=None)
    args = parser.parse_args(argv)
    failed = []
    for name, _ in list_experiments():
        cfg = builtin_config(name).with_overrides(out=Path(args.out) / name)
        t0 = time.perf_counter()
        result = run_experiment(cfg, workers=args.workers)
        print(f"== {name} ({time.perf_counter() - t0:.1f}s)")
        for r in result.reports:
            print("   " + r.line())
        if not result.passed:
            failed.append(name)
    print(f"{len(failed)} experiment(s) with failing reports: {', '.join(failed) or 'none'}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
