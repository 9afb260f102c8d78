"""Command line entry point: ``edgeavg run --config PATH [...]``.

Exit codes: 0 success, 1 configuration error, 2 runtime or invariant error
(including an unwritable output directory).
"""

from __future__ import annotations

import argparse
import sys

from ..errors import ConfigError, ConstructionError, InvariantError
from .config import EXPERIMENTS, parse_config
from .output import write_outputs
from .runner import run_experiment


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="edgeavg", description="Edge-averaging process experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment from a config file")
    run.add_argument("--config", required=True, help="path to a key = value config file")
    run.add_argument("--seed", type=int, help="override the config seed")
    run.add_argument("--replicas", type=int, help="override the replica count")
    run.add_argument("--out", help="override the output directory")
    run.add_argument("--experiment", choices=EXPERIMENTS, help="override the experiment name")
    run.add_argument("--workers", type=int, help="worker processes for replicas")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 1
    overrides = {"seed": args.seed, "replicas": args.replicas, "out_dir": args.out,
                 "experiment": args.experiment, "workers": args.workers}
    try:
        cfg = parse_config(text, overrides)
        result = run_experiment(cfg)
    except (ConfigError, ConstructionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (InvariantError, ValueError, RuntimeError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    try:
        paths = write_outputs(cfg.out_dir, result)
    except OSError as exc:
        print(f"runtime error: cannot write outputs to {cfg.out_dir}: {exc}", file=sys.stderr)
        return 2
    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
