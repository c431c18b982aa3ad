"""Command-line entry point: ``optokerr {predict,sweep,validate-config}``.

Exit codes: 0 success, 1 output could not be written, 2 configuration
error, 3 no limit cycle at any grid point, 4 solver failure at every
grid point.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .config import FORMATS, load_config, parse_tiers
from .errors import ConfigError
from .sweep import emit, run_sweep

EXIT_OK = 0
EXIT_OUTPUT = 1
EXIT_CONFIG = 2
EXIT_NO_LIMIT_CYCLE = 3
EXIT_SOLVER = 4


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="key = value configuration file")
    common.add_argument("--mode", help="analytic, fokker-planck, langevin, qme, compare, "
                                       "or a comma list of tiers")
    common.add_argument("--output", help="output file (default: stdout)")
    common.add_argument("--format", choices=FORMATS, help="output format")
    common.add_argument("--seed", type=int, help="master seed for stochastic tiers")
    common.add_argument("--jobs", type=int, help="worker processes for grid points")

    parser = argparse.ArgumentParser(prog="optokerr", description=(
        "Phonon-number statistics of a Kerr-nonlinear optomechanical oscillator."))
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("predict", parents=[common], help="evaluate the base point (sweep ignored)")
    sub.add_parser("sweep", parents=[common], help="evaluate every grid point")
    sub.add_parser("validate-config", parents=[common], help="parse and check a configuration")
    return parser


def _apply_overrides(cfg, args):
    if args.mode is not None:
        cfg = replace(cfg, tiers=parse_tiers(args.mode, key="--mode"))
    if args.format is not None:
        cfg = replace(cfg, output_format=args.format)
    if args.output is not None:
        cfg = replace(cfg, output_path=args.output)
    if args.seed is not None:
        cfg = replace(cfg, sim=replace(cfg.sim, seed=args.seed))
    if args.jobs is not None:
        if args.jobs < 1:
            raise ConfigError("must be >= 1", key="--jobs")
        cfg = replace(cfg, jobs=args.jobs)
    return cfg


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _apply_overrides(load_config(args.config), args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "validate-config":
        print(f"ok: {cfg.n_points} point(s), tiers {','.join(cfg.tiers)}, "
              f"{len(cfg.base.system().drives)} drive(s)")
        return EXIT_OK
    if args.command == "predict":
        cfg = replace(cfg, axes=())

    rows = run_sweep(cfg)
    text = emit(rows, cfg.output_format)
    if cfg.output_path:
        try:
            with open(cfg.output_path, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"cannot write output: {exc}", file=sys.stderr)
            return EXIT_OUTPUT
    else:
        sys.stdout.write(text)

    for i, row in enumerate(rows):
        for tier, msg in row.failures:
            print(f"point {i}: {tier}: {msg}", file=sys.stderr)
    if all(row.failures for row in rows):
        return EXIT_SOLVER
    if not any(row.limit_cycle for row in rows):
        return EXIT_NO_LIMIT_CYCLE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
