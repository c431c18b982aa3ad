"""Tabulate optical damping, diffusion and radial drift against amplitude.

Usage: python scripts/damping_curves.py CONFIG [--bmax 20] [--points 41]
"""
import argparse

import numpy as np

from optokerr.config import load_config
from optokerr.model import total_diffusion, total_drift, total_gamma_opt
from optokerr.semiclassical import NoLimitCycleError, find_limit_cycle


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("--bmax", type=float, default=20.0)
    ap.add_argument("--points", type=int, default=41)
    args = ap.parse_args()

    p = load_config(args.config).base.system()
    B = np.linspace(0.0, args.bmax, args.points)
    gamma = total_gamma_opt(p, B)
    diff = total_diffusion(p, B)
    drift = total_drift(p, B)
    print("# B gamma_opt diffusion drift")
    for row in zip(B, gamma, diff, drift):
        print(" ".join(f"{v:.6e}" for v in row))
    try:
        lc = find_limit_cycle(p)
        print(f"# limit cycle B0={lc.B0:.6g} Gamma_L={lc.Gamma_L:.4g} sigma2={lc.sigma2:.4g} "
              f"F={lc.fano:.4g}")
    except NoLimitCycleError as exc:
        print(f"# no limit cycle: {exc}")


if __name__ == "__main__":
    main()
