"""Command-line entry point: run / validate / list-experiments."""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import experiments


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="billspec",
        description="Eigenvalue-cluster experiments for periodic billiard models",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config", help="path to a JSON config")
    p_run.add_argument("--out-dir", default=None, help="output directory")
    p_run.add_argument("--seed", type=int, default=None, help="override config seed")
    p_run.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: BILLSPEC_THREADS or 1)")

    p_val = sub.add_parser("validate", help="validate a config without running")
    p_val.add_argument("config", help="path to a JSON config")

    sub.add_parser("list-experiments", help="list available experiment kinds")

    args = parser.parse_args(argv)

    if args.command == "list-experiments":
        for name in experiments.EXPERIMENTS:
            print(name)
        return 0

    with open(args.config, "r", encoding="utf-8") as fh:
        cfg = json.load(fh)

    if args.command == "validate":
        diags = experiments.validate(cfg)
        if diags:
            for d in diags:
                print(f"invalid: {d}")
            return 2
        print("ok")
        return 0

    if args.seed is not None:
        cfg["seed"] = args.seed
    threads = args.threads
    if threads is None:
        threads = int(os.environ.get("BILLSPEC_THREADS", "1"))
    cfg.setdefault("grid", {})["threads"] = threads
    try:
        experiments.run(cfg, out_dir=args.out_dir)
    except experiments.ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 2
    except experiments.CertificationError as exc:
        print(f"certification failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
