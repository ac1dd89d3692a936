"""How ||rho (1 - rho)||_1 / mass scales with the grid on the radial case.

Usage: python scripts/patch_residual_scaling.py [--T 0.1] [--tau 2e-3]
"""

from __future__ import annotations

import argparse

from tumorpatch.grid import GridSpec, ball, constant
from tumorpatch.scheme import SchemeParams, run


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--T", type=float, default=0.1)
    ap.add_argument("--tau", type=float, default=2e-3)
    ap.add_argument("--sizes", type=int, nargs="+", default=[64, 128, 256])
    args = ap.parse_args()
    print(f"{'n':>5} {'h':>9} {'max patch/mass':>15} {'h/(3R)':>9}")
    for n in args.sizes:
        g = GridSpec.square(n, 4.0)
        res = run(ball(g, 0.5), constant(g, 2.0), SchemeParams(tau=args.tau, T_final=args.T), patch_check=True)
        worst = max(r.patch_residual / r.mass for r in res.diagnostics[1:])
        R = max(r.r_max for r in res.diagnostics)
        print(f"{n:>5} {g.hmin:>9.5f} {worst:>15.3e} {g.hmin / (3 * R):>9.3e}")


if __name__ == "__main__":
    main()
