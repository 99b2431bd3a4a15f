"""Contour data (CSV + SVG + JSON) for the benchmark regions.

Writes one artifact set per (system, degree) under ``--out``; the SVGs show
the boundary of the calibrated region over the training samples.
"""

import argparse
from pathlib import Path

from christoffel_reach.evaluation import TrialConfig, build_estimate, derive_seeds, export_grid, write_grid
from christoffel_reach.systems import make_system

CASES = [
    ("four_squares", 3, ((-4, -4), (4, 4))),
    ("four_squares", 6, ((-4, -4), (4, 4))),
    ("four_squares", 15, ((-4, -4), (4, 4))),
    ("star_region", 10, ((-1.2, -1.2), (1.2, 1.2))),
    ("duffing", 10, ((-2.5, -1.5), (2.5, 2.5))),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("figures"))
    ap.add_argument("--resolution", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    for name, d, (lo, hi) in CASES:
        cfg = TrialConfig(system=name, M=10_000 if name != "duffing" else 2000, N=2000 if name != "duffing" else 400,
                          degree=d)
        est, data, part = build_estimate(cfg, make_system(name), derive_seeds(args.seed, 0))
        grid = export_grid(est, lo, hi, args.resolution)
        doc = write_grid(grid, args.out / f"{name}_d{d}", {**cfg.to_dict(), "seed": args.seed}, part.training)
        print(f"{name} d={d}: {doc['components']} component(s) -> {args.out / f'{name}_d{d}'}.svg")


if __name__ == "__main__":
    main()
