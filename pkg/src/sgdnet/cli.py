"""Command line entry point: ``sgdnet <task> [--config PATH] [--out DIR] [--seed N] [--runs N]``."""
from __future__ import annotations

import argparse
import logging
import sys

from .data import IdxError
from .experiments import TASKS, ExperimentError, LemmaViolation, load_config, run_experiment

log = logging.getLogger("sgdnet")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sgdnet", description=__doc__)
    sub = parser.add_subparsers(dest="task", required=True)
    for task in TASKS:
        p = sub.add_parser(task)
        p.add_argument("--config", metavar="PATH", help="INI config file")
        p.add_argument("--out", metavar="DIR", help="output directory (overrides config)")
        p.add_argument("--seed", metavar="N", type=int, help="base seed (overrides config)")
        p.add_argument("--runs", metavar="N", type=int, help="runs per k (overrides config)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, task=args.task, output_dir=args.out,
                          base_seed=args.seed, runs=args.runs)
        log.info("running %s into %s", cfg.task, cfg.output_dir)
        paths = run_experiment(cfg)
    except (ExperimentError, IdxError, LemmaViolation, ValueError, OSError) as exc:
        print(f"sgdnet {args.task}: error: {exc}", file=sys.stderr)
        return 2
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
