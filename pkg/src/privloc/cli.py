"""Command-line experiment driver.

    privloc run    --config cfg.json --out results.csv --format csv --seed 1 --mode paper
    privloc oracle --out raw.csv                 # plaintext raw-ToA baseline only
    privloc check                                # acceptance property suite

Exit codes: 0 success, 1 configuration error, 2 acceptance failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from privloc.simulate import (ExperimentConfig, emit_results, run_oracle_sweep,
                              run_sweep)


def _load_config(args) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.from_json(Path(args.config).read_text())
    else:
        cfg = ExperimentConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "mode", None):
        overrides["accounting_mode"] = args.mode
    if overrides:
        cfg = replace(cfg, **overrides)
    cfg.validate()
    return cfg


def _add_io_flags(sub, with_mode=True):
    sub.add_argument("--config", help="JSON config file (ExperimentConfig fields)")
    sub.add_argument("--out", required=True, help="output file path")
    sub.add_argument("--format", choices=["csv", "json"], default="csv")
    sub.add_argument("--seed", type=int, default=None)
    if with_mode:
        sub.add_argument("--mode", choices=["paper", "strict"], default=None,
                         help="communication accounting mode")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="privloc", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)
    _add_io_flags(subs.add_parser("run", help="full private-protocol sweep"))
    _add_io_flags(subs.add_parser("oracle", help="plaintext baseline sweep"),
                  with_mode=False)
    subs.add_parser("check", help="run the acceptance property suite")
    args = parser.parse_args(argv)

    if args.command == "check":
        from privloc.acceptance import run_all
        return 0 if run_all() else 2

    try:
        cfg = _load_config(args)
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    if args.command == "run":
        records, failures = run_sweep(cfg)
    else:
        records, failures = run_oracle_sweep(cfg)
    for f in failures:
        print(f"trial failed: m={f.m} n={f.n} trial={f.trial}: {f.error}",
              file=sys.stderr)
    try:
        emit_results(records, args.out, args.format)
    except (OSError, ValueError) as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return 1
    print(f"{len(records)} records -> {args.out} "
          f"({len(failures)} failed trials)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
