"""Command-line entry point: ``cidlab run`` and ``cidlab list``."""
from __future__ import annotations

import argparse
import sys

from .config import ConfigError, ExperimentConfig
from .experiments import builtin_config, list_experiments, run_experiment


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cidlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a configured or built-in experiment")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="JSON experiment config")
    src.add_argument("--experiment", help="name of a built-in experiment")
    run.add_argument("--seed", type=int, help="override the master seed")
    run.add_argument("--reps", type=int, help="override the replication count")
    run.add_argument("--out", help="output directory (default runs/<name>)")
    run.add_argument("--workers", type=int, help="thread count (capped by CIDLAB_WORKERS)")
    run.add_argument("--quiet", action="store_true", help="print only the verdict")

    sub.add_parser("list", help="list built-in experiments")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        for name, desc in list_experiments():
            print(f"{name:24s} {desc}")
        return 0
    try:
        cfg = (ExperimentConfig.from_json(args.config) if args.config
               else builtin_config(args.experiment))
        cfg = cfg.with_overrides(seed=args.seed, reps=args.reps, out=args.out)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2
    except KeyError as exc:
        print(exc.args[0], file=sys.stderr)
        return 2
    result = run_experiment(cfg, workers=args.workers)
    if not args.quiet:
        for r in result.reports:
            print(r.line())
    verdict = "PASS" if result.passed else "FAIL"
    print(f"{verdict} {cfg.name} ({sum(r.passed for r in result.reports)}/{len(result.reports)})")
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
