#!/usr/bin/env python3
"""Trace the competitive ratio of ordinal ranks across the two benchmark
instances, bracketing the optimum near the omega-constant rank.

Usage: python scripts/run_rank_curve.py [--k 10000] [--points 21] [--reps 10000]
"""

import argparse
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from prophet_samples import omega_rho, ordinal_upper_bound_sweep, recommended_rank  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--k", type=int, default=10_000)
    parser.add_argument("--points", type=int, default=21)
    parser.add_argument("--reps", type=int, default=10_000)
    parser.add_argument("--seed", type=int, default=17)
    args = parser.parse_args()

    k = args.k
    ranks = sorted(
        {max(1, round(k * frac)) for frac in
         (i / (args.points - 1) for i in range(args.points))}
        | {recommended_rank(k), round(omega_rho() * k)}
    )
    rows = ordinal_upper_bound_sweep(k, ranks, args.reps, args.seed)
    print("k,l,case1_ratio,case2_ratio,min_ratio")
    for row in rows:
        print(f"{k},{row.rank},{row.case1.ratio!r},{row.case2.ratio!r},{row.min_ratio!r}")
    best = max(rows, key=lambda r: r.min_ratio)
    print(
        f"best rank {best.rank} (recommended {recommended_rank(k)}), "
        f"min ratio {best.min_ratio:.4f}, limit 1-rho = {1 - omega_rho():.4f}",
        file=sys.stderr,
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
