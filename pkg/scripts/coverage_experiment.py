"""Repeated coverage experiment; writes the JSON trial report.

    python scripts/coverage_experiment.py --degree 10 --R 1000 --out results/split_d10.json
    python scripts/coverage_experiment.py --robust --R 1000 --out results/robust.json
"""

import argparse
import json
from pathlib import Path

from christoffel_reach.evaluation import TrialConfig, coverage_trials


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--degree", type=int, default=10)
    ap.add_argument("--R", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--robust", action="store_true", help="M=1500, 10%% outliers, N=500, p=50, eps=0.15, d=15")
    ap.add_argument("--out", type=Path)
    args = ap.parse_args()

    if args.robust:
        cfg = TrialConfig(M=1500, N=500, degree=15, mode="robust", epsilon=0.15, p=50, outlier_fraction=0.10)
    else:
        cfg = TrialConfig(M=1000, N=200, degree=args.degree, delta=0.01)
    rep = coverage_trials(cfg, args.R, args.seed, workers=args.workers)
    cov = sorted(t["empirical_coverage"] for t in rep.per_trial if "error" not in t)
    print(f"violations {rep.violations}/{rep.repetitions} at eps={rep.epsilon:.5f}; "
          f"coverage min {cov[0]:.4f}, median {cov[len(cov) // 2]:.4f}; failures {len(rep.failures)}")
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(json.dumps(rep.to_dict(), indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
