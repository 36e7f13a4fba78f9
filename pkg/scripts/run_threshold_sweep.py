#!/usr/bin/env python3
"""Sweep the routing weight of the single-circle family across the small-gain
threshold and print the certificate against the fitted decay/growth rate."""

import argparse

from kinnet import sweep
from kinnet.presets import single_circle, single_circle_threshold_w


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--gamma", type=float, default=0.5)
    ap.add_argument("--length", type=float, default=1.0)
    ap.add_argument("--delay", type=float, default=0.5)
    ap.add_argument("--scales", default="0.4,0.6,0.8,0.95,1.05,1.25,1.6,2.0")
    ap.add_argument("--out", default=None, help="optional CSV path")
    args = ap.parse_args()

    wstar = single_circle_threshold_w(gamma=args.gamma, length=args.length,
                                      delay=args.delay)
    spec = single_circle(wstar, gamma=args.gamma, length=args.length,
                         delay=args.delay)
    values = [float(v) for v in args.scales.split(",")]
    result = sweep(spec, "routing_scale", values)

    print(f"critical routing weight (closed form): {wstar:.6f}")
    print(f"{'scale':>8} {'r_gain':>10} {'a_hat':>10} decision")
    for v, r, a, d in zip(result.values, result.r_gains, result.a_hats,
                          result.decisions):
        a_str = "extinct" if a is None else f"{a:10.4f}"
        print(f"{v:8.3f} {r:10.6f} {a_str:>10} {d}")
    print(f"threshold located at scale {result.threshold}")
    print(f"certificate/behavior agreement: {result.agreement}")
    if args.out:
        result.to_csv(args.out)
        print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
