"""Perimeter/sqrt(area) of {rho >= 1/2} along a run with cell death.

Prints the ratio, the mass and the density at the origin (which drops
below 1/2 once the nutrient-starved core opens). Optionally saves the
density snapshots to an .npz file.

Usage: python scripts/dendrite_shape_ratio.py [--n 128] [--T 10] [--save out.npz]
"""

from __future__ import annotations

import argparse

import numpy as np

from tumorpatch.geometry import sample, shape_ratio
from tumorpatch.grid import GridSpec, constant, lobed
from tumorpatch.scheme import SchemeParams, run


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=128)
    ap.add_argument("--T", type=float, default=10.0)
    ap.add_argument("--tau", type=float, default=5e-3)
    ap.add_argument("--b", type=float, default=0.4)
    ap.add_argument("--n0", type=float, default=2.0)
    ap.add_argument("--every", type=float, default=0.5)
    ap.add_argument("--save")
    args = ap.parse_args()
    g = GridSpec.square(args.n, 6.0)
    times = np.arange(0.0, args.T + 1e-9, args.every)
    res = run(lobed(g, 0.5, 0.1, 5), constant(g, args.n0),
              SchemeParams(tau=args.tau, T_final=args.T, b=args.b), snapshot_times=times)
    origin = np.zeros((2, 1))
    print(f"{'t':>6} {'ratio':>8} {'mass':>8} {'rho(0)':>7}")
    for s in res.trajectory:
        print(f"{s.t:>6.2f} {shape_ratio(s.rho):>8.4f} {s.rho.mass():>8.4f} "
              f"{float(sample(s.rho.values, g, origin)[0]):>7.3f}")
    if args.save:
        np.savez_compressed(args.save, t=[s.t for s in res.trajectory],
                            rho=np.stack([s.rho.values for s in res.trajectory]))


if __name__ == "__main__":
    main()
