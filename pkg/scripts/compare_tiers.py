"""Run a sweep config through the requested tiers and print a short table.

Usage: python scripts/compare_tiers.py [CONFIG] [--mode compare]

Defaults to ``two_laser_sweep.cfg`` next to this script.
"""
import argparse
import time
from dataclasses import replace
from pathlib import Path

from optokerr.config import load_config, parse_tiers
from optokerr.sweep import run_sweep

SHOWN = ("kappa", "delta1", "n_analytic", "F_analytic", "F_fp", "F_langevin", "F_qme",
         "rel_dev_F")


def fmt(value):
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.4g}"
    return str(value)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config", nargs="?", default=Path(__file__).with_name("two_laser_sweep.cfg"))
    ap.add_argument("--mode", help="override the tiers, e.g. analytic,qme")
    args = ap.parse_args()

    cfg = load_config(args.config)
    if args.mode:
        cfg = replace(cfg, tiers=parse_tiers(args.mode))
    start = time.perf_counter()
    rows = run_sweep(cfg)
    print("  ".join(f"{c:>11}" for c in SHOWN))
    for r in rows:
        print("  ".join(f"{fmt(r[c]):>11}" for c in SHOWN))
        for tier, msg in r.failures:
            print(f"    {tier} failed: {msg}")
    print(f"{len(rows)} point(s) in {time.perf_counter() - start:.1f} s")


if __name__ == "__main__":
    main()
