"""Run one built-in at two worker counts and compare artifacts byte for byte.

Usage: python3 scripts/check_determinism.py <experiment> [--workers 1 8]
"""
import argparse
import sys
import tempfile
from pathlib import Path

from cidlab.experiments import builtin_config, run_experiment

ARTIFACTS = ("summary.csv", "replications.csv", "reports.json")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("experiment")
    parser.add_argument("--workers", type=int, nargs=2, default=(1, 8))
    args = parser.parse_args(argv)
    with tempfile.TemporaryDirectory() as tmp:
        dirs = []
        for w in args.workers:
            out = Path(tmp) / f"w{w}"
            run_experiment(builtin_config(args.experiment).with_overrides(out=out), workers=w)
            dirs.append(out)
        same = True
        for f in ARTIFACTS:
            ok = (dirs[0] / f).read_bytes() == (dirs[1] / f).read_bytes()
            same &= ok
            print(f"{'identical' if ok else 'DIFFERENT'} {f}")
    return 0 if same else 1


if __name__ == "__main__":
    sys.exit(main())
