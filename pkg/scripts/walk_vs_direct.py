"""Cross-check the two routes to the flux on the truncated surviving tree.

Route one materializes the spine-plus-grafts tree and parks it; route two
never builds a tree and instead takes the running maximum of the spine load
walk fed by a pool of independent flux draws.  In the subcritical regime the
two empirical laws must coincide.

Example:
    python scripts/walk_vs_direct.py --offspring poisson:1 --cars poisson:0.25 \
        --H 100 --reps 20000
"""

import argparse
import sys

import parkflux as pf
from parkflux import cli


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--offspring", type=cli.parse_dist, required=True)
    ap.add_argument("--cars", type=cli.parse_dist, required=True)
    ap.add_argument("--H", type=int, default=100)
    ap.add_argument("--reps", type=int, default=20000)
    ap.add_argument("--pool", type=int, default=500_000)
    ap.add_argument("--cap", type=int, default=10**6)
    ap.add_argument("--graft-depth", type=int, default=256)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    off = pf.make_law(args.offspring)
    cars = pf.make_law(args.cars)
    direct = pf.estimate_flux_infinite_direct(
        off, cars, args.H, args.reps, args.seed, args.cap, args.graft_depth,
        args.workers)
    walk = pf.estimate_flux_infinite_walk(
        off, cars, args.H, args.reps, args.pool, args.seed,
        min(args.cap, 10**5), args.workers)
    ks = pf.ks_distance(direct.samples, walk.samples)

    print(f"direct: mean {direct.samples.mean():.5f} "
          f"overflow {direct.overflow_count} diverged {direct.diverged}")
    print(f"walk:   mean {walk.samples.mean():.5f} "
          f"pool-overflow {walk.overflow_count} diverged {walk.diverged}")
    print(f"two-sample KS distance: {ks:.5f}")
    hist_d, hist_w = direct.histogram(), walk.histogram()
    top = sorted(set(hist_d) | set(hist_w))[:12]
    print("flux   direct      walk")
    for v in top:
        print(f"{v:<6d} {hist_d.get(v, 0) / args.reps:<11.5f} "
              f"{hist_w.get(v, 0) / args.reps:.5f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
