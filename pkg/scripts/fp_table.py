"""False-positive rates on the four-squares benchmark over [-4, 4]^2.

Split calibration uses M=10000 points with N=2000 held out for calibration;
the transductive row uses 1000 points. Each row is repeated ``--reps`` times
with derived seeds, since single runs vary a lot at high degree.
"""

import argparse

import numpy as np

from christoffel_reach.christoffel import make_transductive
from christoffel_reach.conformal import transductive_region
from christoffel_reach.evaluation import TrialConfig, build_estimate, derive_seeds, false_positive_rate
from christoffel_reach.monomials import MonomialBasis
from christoffel_reach.systems import four_squares, sample_reach_set

BOX = ((-4.0, -4.0), (4.0, 4.0))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--reps", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--degrees", default="6,10,15")
    ap.add_argument("--transductive", action="store_true", help="add the transductive d=15 row (slow)")
    args = ap.parse_args()

    system = four_squares()
    for d in (int(s) for s in args.degrees.split(",")):
        rates = []
        for i in range(args.reps):
            seeds = derive_seeds(args.seed, i)
            est, _, _ = build_estimate(TrialConfig(M=10_000, N=2000, degree=d), system, seeds)
            rates.append(100 * false_positive_rate(est, system, BOX, 10_000, seeds[3]))
        print(f"split d={d:>2}: mean {np.mean(rates):5.1f}%  median {np.median(rates):5.1f}%  "
              f"range {min(rates):.1f}-{max(rates):.1f}%")
    if args.transductive:
        rates = []
        for i in range(args.reps):
            seeds = derive_seeds(args.seed, i)
            pts = sample_reach_set(system, 1000, seeds[0]).points
            region = transductive_region(make_transductive(pts, MonomialBasis(2, 15)), 0.01)
            rates.append(100 * false_positive_rate(region, system, BOX, 10_000, seeds[3]))
        print(f"transductive d=15: mean {np.mean(rates):5.1f}%  range {min(rates):.1f}-{max(rates):.1f}%")


if __name__ == "__main__":
    main()
