"""Command-line entry point: one subcommand per pipeline stage plus ``run``."""

from __future__ import annotations

import argparse
import sys

from .pipeline import ConfigError, RunConfig, StageError, Runner

COMMANDS = {
    "preprocess": "preprocess",
    "selectk": "selectk",
    "cluster": "cluster",
    "classify": "classify",
    "explain": "explain",
    "report": "report",
    "run": "report",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clusterlens",
        description="Cluster time series, classify the clusters and explain the classifiers.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help="full pipeline" if name == "run"
                           else f"run the pipeline up to the {name} stage")
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", help="output directory (overrides output_dir)")
        p.add_argument("--seed", type=int, help="master seed (overrides master_seed)")
        p.add_argument("--force", action="store_true", help="ignore cached stage results")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.from_json(args.config)
        if args.seed is not None:
            cfg.master_seed = args.seed
    except (OSError, ConfigError) as exc:
        print(f"clusterlens: stage config failed: {exc}", file=sys.stderr)
        return 2
    try:
        manifest = Runner(cfg, out_dir=args.out, force=args.force).run(COMMANDS[args.command])
    except StageError as exc:
        print(f"clusterlens: {exc}", file=sys.stderr)
        return 1
    for stage, rec in manifest.stages.items():
        print(f"{stage:<11} {rec['status']:<8} {rec['seconds']:7.2f}s")
    print(f"artifacts in {manifest.output_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
