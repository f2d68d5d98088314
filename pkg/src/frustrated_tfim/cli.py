"""Command-line entry point: ``frustrated-tfim <scenario> --config FILE``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .config import SCENARIOS, ConfigError, load_config, validate_config
from .runner import OUT_ENV, ResourceError, run_scenario

EXIT_OK, EXIT_FAILED_CELLS, EXIT_CONFIG, EXIT_RESOURCE = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="frustrated-tfim",
        description="Exact and variational benchmarks for the frustrated TFIM. "
                    f"Outputs go to --out, else the config's output_dir, else ${OUT_ENV}/<name>.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in SCENARIOS:
        p = sub.add_parser(name, help=f"run the {name} scenario")
        p.add_argument("--config", "-c", required=True, help="JSON experiment config")
        p.add_argument("--out", "-o", help="output directory")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--jobs", "-j", type=int, help="cells run concurrently")
        p.add_argument("--threads", type=int,
                       help="BLAS threads per process (set before numpy loads)")
        p.add_argument("--memory-budget", type=float, help="bytes; guards Krylov and statevectors")
        p.add_argument("--allow-large", action="store_true",
                       help="permit Lanczos above N=20 (ground energy only)")
        p.add_argument("-v", "--verbose", action="count", default=0)
    v = sub.add_parser("validate", help="check config files against the schema")
    v.add_argument("configs", nargs="+")
    return ap


def _validate(paths) -> int:
    status = EXIT_OK
    for path in paths:
        try:
            errors = validate_config(path)
        except ConfigError as exc:
            errors = exc.errors
        if errors:
            status = EXIT_CONFIG
            print(f"{path}: INVALID")
            for e in errors:
                print(f"  {e}")
        else:
            print(f"{path}: ok")
    return status


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "validate":
        return _validate(args.configs)
    if args.threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                    "NUMBA_NUM_THREADS"):
            os.environ[var] = str(args.threads)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"{args.config}: invalid config", file=sys.stderr)
        for e in exc.errors:
            print(f"  {e}", file=sys.stderr)
        return EXIT_CONFIG
    if cfg["scenario"] != args.command:
        print(f"config declares scenario {cfg['scenario']!r}, not {args.command!r}",
              file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.memory_budget is not None:
        cfg["resources"]["memory_budget"] = args.memory_budget
    if args.allow_large:
        cfg["resources"]["allow_large"] = True
    try:
        report = run_scenario(cfg, out_dir=args.out, jobs=args.jobs)
    except (ResourceError, MemoryError) as exc:
        print(f"resource guard: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    print(json.dumps({"status": report["status"], "output_dir": report["output_dir"],
                      "tables": report["tables"], "failures": report["failures"]}, indent=2))
    for f in report["failures"]:
        print(f"cell {f['index']} {f['cell']} failed: {f['error']}", file=sys.stderr)
    return EXIT_FAILED_CELLS if report["failures"] else EXIT_OK
