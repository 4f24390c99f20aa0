#!/usr/bin/env python3
"""Tightness grid: the closed-form certificates against the quoted baselines.

Prints one row per (n, beta, delta) with the simple bounded-difference bound,
the Gibbs baseline, their ratio, and whether the empirical-error chain beats
the inverted kl baseline at each empirical error level.

Example:
    python3 scripts/tightness_grid.py --ns 100,1000,10000,100000 --deltas 0.05,0.01
"""

import argparse
import math
import sys

from gapcert.verify import tightness_report


def beta_grid(tags):
    def of_n(n):
        out = []
        for tag in tags:
            if tag == "sqrt_n":
                out.append(math.sqrt(n))
            elif tag == "n_over_10":
                out.append(n / 10.0)
            else:
                out.append(float(tag))
        return out
    return of_n


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--ns", default="100,1000,10000",
                        help="comma-separated sample sizes")
    parser.add_argument("--betas", default="0,sqrt_n,n_over_10",
                        help="comma-separated beta tags (numbers, sqrt_n, n_over_10)")
    parser.add_argument("--deltas", default="0.5,0.05,0.01",
                        help="comma-separated confidence levels")
    parser.add_argument("--l-hats", default="0,0.1,0.3",
                        help="empirical error levels for the kl chain")
    args = parser.parse_args(argv)

    ns = [int(x) for x in args.ns.split(",")]
    deltas = [float(x) for x in args.deltas.split(",")]
    l_hats = [float(x) for x in args.l_hats.split(",")]

    rows = tightness_report(ns, beta_grid(args.betas.split(",")), deltas, l_hats)
    header = (f"{'n':>8} {'beta':>10} {'delta':>7} {'bound':>10} {'baseline':>10} "
              f"{'ratio':>7} {'improved':>8}  kl-chain")
    print(header)
    print("-" * len(header))
    all_improved = True
    for r in rows:
        all_improved = all_improved and r.improvement_holds
        chain = " ".join(
            f"L^={lh:g}:{'<' if e['improvement_holds'] else '>'}"
            for lh, e in sorted(r.kl_chain.items()))
        print(f"{r.n:>8} {r.beta:>10.3f} {r.delta:>7.3g} {r.eq_simple:>10.5f} "
              f"{r.baseline_gibbs:>10.5f} {r.ratio:>7.3f} "
              f"{str(r.improvement_holds):>8}  {chain}")
    print(f"\n{len(rows)} grid points; simple bound below baseline at "
          f"{sum(r.improvement_holds for r in rows)}/{len(rows)}")
    return 0 if all_improved else 1


if __name__ == "__main__":
    sys.exit(main())
