#!/usr/bin/env python3
"""Track the total mass (circles plus delay lines) of the lossless network
over many circulation periods and report the drift at several resolutions."""

import argparse

import numpy as np

from kinnet import VelocityGrid, make_scenario, network_bounds, run
from kinnet.presets import conservation_spec


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--periods", type=float, default=10.0)
    ap.add_argument("--csv", default=None, help="optional trajectory CSV path")
    args = ap.parse_args()

    spec = conservation_spec()
    b = network_bounds(spec)
    t_end = args.periods * (b.l_bar / spec.v_min + b.r_bar)
    print(f"horizon: {t_end:.2f} ({args.periods} circulation periods)")
    print(f"{'m_base':>7} {'k':>4} {'max rel drift':>14}")
    last = None
    for m_base, k in ((32, 8), (64, 16), (128, 32)):
        grid = VelocityGrid.for_spec(spec, k)
        sc = make_scenario(spec, grid, t_end=t_end, stride=8, m_base=m_base,
                           initial={"kind": "gaussian_bump", "width": 0.25},
                           history={"kind": "constant", "value": 0.3})
        traj = run(sc)
        m = traj.total_mass
        drift = float(np.max(np.abs(m - m[0])) / m[0])
        print(f"{m_base:7d} {k:4d} {drift:14.3e}")
        last = traj
    if args.csv and last is not None:
        last.to_csv(args.csv)
        print(f"wrote {args.csv}")


if __name__ == "__main__":
    main()
