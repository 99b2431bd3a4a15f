"""Validation harness: repeated coverage trials, false-positive rates, grids."""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import ndimage

from . import bounds
from .christoffel import fit, make_transductive
from .conformal import calibrate, calibrate_robust, split, transductive_region
from .monomials import MonomialBasis
from .systems import (
    BenchmarkSystem,
    inject_outliers,
    make_system,
    sample_reach_set,
    true_membership,
)

SPLIT = "split"
ROBUST = "robust"
TRANSDUCTIVE = "transductive"


def manifest_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def derive_seeds(master_seed: int, index: int, count: int = 4) -> list[int]:
    """Sub-seeds for repetition ``index``: ``SeedSequence([master_seed, index])``.

    The same (master_seed, index) pair always gives the same streams,
    whatever order the repetitions run in.
    """
    state = np.random.SeedSequence([int(master_seed), int(index)]).generate_state(count, np.uint32)
    return [int(s) for s in state]


@dataclass(frozen=True)
class TrialConfig:
    system: str = "four_squares"
    M: int = 1000
    N: int = 200
    degree: int = 10
    mode: str = SPLIT
    delta: float = 0.01
    epsilon: Optional[float] = None
    p: int = 0
    outlier_fraction: float = 0.0
    outlier_box: tuple = ((-4.0, -4.0), (4.0, 4.0))
    n_eval: int = 10_000
    rescale: bool = True
    ridge: float = 0.0

    def __post_init__(self):
        if self.mode not in (SPLIT, ROBUST, TRANSDUCTIVE):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == TRANSDUCTIVE:
            if self.N != self.M:
                raise ValueError("transductive mode uses the whole dataset: N must equal M")
            train = self.M
        else:
            if not self.M > self.N >= 1:
                raise ValueError(f"need M > N >= 1, got M={self.M}, N={self.N}")
            train = self.M - self.N
        if self.mode == ROBUST:
            if self.epsilon is None:
                raise ValueError("robust mode needs epsilon")
            if not 2 * self.p + 1 < self.N:
                raise ValueError(f"robust mode needs 2p+1 < N, got p={self.p}, N={self.N}")
        if self.n_eval < 1:
            raise ValueError("n_eval must be positive")
        if not 0.0 <= self.outlier_fraction < 1.0:
            raise ValueError("outlier_fraction must lie in [0, 1)")
        if train < 1:
            raise ValueError("empty training set")

    def coverage_epsilon(self) -> float:
        if self.mode == ROBUST:
            return float(self.epsilon)
        return bounds.split_epsilon(self.N, self.delta)

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["outlier_box"] = [list(map(float, c)) for c in self.outlier_box]
        return doc


def build_estimate(config: TrialConfig, system: BenchmarkSystem, seeds: list[int]):
    """Sample, contaminate, split, fit and calibrate once; returns ``(region, dataset, partition)``."""
    data = sample_reach_set(system, config.M, seeds[0])
    if config.outlier_fraction > 0:
        data = inject_outliers(data, config.outlier_fraction, config.outlier_box, seeds[1], system=system)
    basis = MonomialBasis(system.dimension, config.degree)
    if config.mode == TRANSDUCTIVE:
        ctx = make_transductive(data.points, basis, rescale=config.rescale, ridge=config.ridge)
        return transductive_region(ctx, config.delta), data, None
    part = split(data.points, config.N, seeds[2], labels=data.labels)
    model = fit(part.training, basis, rescale=config.rescale, ridge=config.ridge)
    if config.mode == ROBUST:
        est = calibrate_robust(model, part.calibration, config.p, config.epsilon)
    else:
        est = calibrate(model, part.calibration, config.delta)
    return est, data, part


def _run_trial(args):
    config, master_seed, index = args
    seeds = derive_seeds(master_seed, index)
    system = make_system(config.system)
    record = {"index": index, "seed": seeds}
    try:
        region, _, _ = build_estimate(config, system, seeds)
        fresh = sample_reach_set(system, config.n_eval, seeds[3]).points
        coverage = float(np.mean(region.contains(fresh)))
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        record["error"] = f"{type(exc).__name__}: {exc}"
        return record
    record["empirical_coverage"] = coverage
    record["threshold"] = float(getattr(region, "threshold", math.nan))
    return record


@dataclass
class TrialReport:
    repetitions: int
    epsilon: float
    violations: int
    per_trial: list = field(repr=False)
    config: dict = field(default_factory=dict)
    master_seed: int = 0

    @property
    def failures(self) -> list:
        return [t for t in self.per_trial if "error" in t]

    def recount(self) -> int:
        return sum(
            1
            for t in self.per_trial
            if "error" not in t and t["empirical_coverage"] < 1.0 - self.epsilon
        )

    def to_dict(self) -> dict:
        return {
            "kind": "trial_report",
            "config": self.config,
            "manifest_sha256": manifest_hash({**self.config, "master_seed": self.master_seed}),
            "master_seed": self.master_seed,
            "repetitions": self.repetitions,
            "epsilon": self.epsilon,
            "violations": self.violations,
            "failures": len(self.failures),
            "per_trial": self.per_trial,
        }


def coverage_trials(config: TrialConfig, R: int, master_seed: int = 0, workers: int = 1) -> TrialReport:
    """Repeat sample/split/fit/calibrate ``R`` times and measure coverage on fresh samples.

    A trial is a violation when its empirical coverage falls below ``1 - epsilon``.
    """
    if R < 1:
        raise ValueError("R must be positive")
    jobs = [(config, master_seed, i) for i in range(R)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_trial = list(pool.map(_run_trial, jobs, chunksize=max(1, R // (8 * workers))))
    else:
        per_trial = [_run_trial(job) for job in jobs]
    eps = config.coverage_epsilon()
    report = TrialReport(
        repetitions=R,
        epsilon=eps,
        violations=0,
        per_trial=per_trial,
        config=config.to_dict(),
        master_seed=master_seed,
    )
    report.violations = report.recount()
    return report


def false_positive_rate(region, system: BenchmarkSystem, box, count: int = 10_000, seed: int = 0) -> float:
    """Fraction of uniform draws in ``box`` that the region accepts but the true set rejects."""
    if not system.has_oracle:
        true_membership(system, np.zeros(system.dimension))  # raises
    if count < 1:
        raise ValueError("count must be positive")
    rng = np.random.default_rng(seed)
    lo = np.asarray(box[0], dtype=float)
    hi = np.asarray(box[1], dtype=float)
    pts = lo + (hi - lo) * rng.random((count, lo.size))
    accepted = np.asarray(region.contains(pts), dtype=bool)
    false_pos = accepted & ~true_membership(system, pts)
    return float(np.mean(false_pos))


@dataclass(frozen=True)
class GridField:
    lower: tuple
    upper: tuple
    resolution: int
    kind: str
    values: np.ndarray = field(repr=False)  # row-major, first axis slowest
    threshold: Optional[float] = None

    @property
    def dimension(self) -> int:
        return len(self.lower)

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(lo, hi, self.resolution) for lo, hi in zip(self.lower, self.upper)]

    def nodes(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])

    def as_array(self) -> np.ndarray:
        return self.values.reshape((self.resolution,) * self.dimension)

    def components(self) -> int:
        """Connected components (4-neighbour) of the membership grid."""
        mask = self.as_array() > 0.5 if self.kind == "membership" else self.as_array() <= self.threshold
        _, count = ndimage.label(mask)
        return int(count)

    def to_csv(self) -> str:
        header = ",".join([f"x{i + 1}" for i in range(self.dimension)] + [self.kind])
        rows = [header]
        for node, value in zip(self.nodes(), self.values):
            rows.append(",".join(repr(float(c)) for c in node) + "," + repr(float(value)))
        return "\n".join(rows) + "\n"


def export_grid(region, lower, upper, resolution: int, kind: str = "membership", batch: int = 4096) -> GridField:
    """Evaluate ``region`` (an estimate, transductive region, or model) on a regular grid.

    ``kind="score"`` needs an object with a ``score`` method or a ``model``.
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    if kind not in ("score", "membership"):
        raise ValueError(f"unknown grid kind {kind!r}")
    threshold = getattr(region, "threshold", None)
    proto = GridField(tuple(map(float, lower)), tuple(map(float, upper)), resolution, kind, np.empty(0), threshold)
    nodes = proto.nodes()
    if kind == "score":
        scorer = region.score if hasattr(region, "score") else region.model.score
        fn = scorer
    else:
        fn = region.contains
    values = np.concatenate(
        [np.asarray(fn(nodes[i : i + batch]), dtype=float) for i in range(0, nodes.shape[0], batch)]
    )
    return GridField(proto.lower, proto.upper, resolution, kind, values, threshold)


# corner order: 0=(i,j) 1=(i+1,j) 2=(i+1,j+1) 3=(i,j+1); edges: 0:c0-c1 1:c1-c2 2:c2-c3 3:c3-c0
_SEGMENTS = {
    1: [(3, 0)], 2: [(0, 1)], 3: [(3, 1)], 4: [(1, 2)], 6: [(0, 2)], 7: [(3, 2)],
    8: [(2, 3)], 9: [(2, 0)], 11: [(2, 1)], 12: [(1, 3)], 13: [(1, 0)], 14: [(0, 3)],
}


def marching_squares(field2d: np.ndarray, level: float, xs: np.ndarray, ys: np.ndarray) -> list:
    """Line segments of the ``level`` isocontour; a corner is "inside" when its value is below ``level``.

    Saddle cells are resolved with the cell-centre average.
    """
    f = np.asarray(field2d, dtype=float)
    segments = []
    nx, ny = f.shape
    for i in range(nx - 1):
        for j in range(ny - 1):
            c = (f[i, j], f[i + 1, j], f[i + 1, j + 1], f[i, j + 1])
            code = sum(1 << k for k in range(4) if c[k] < level)
            if code in (0, 15):
                continue
            corners = ((xs[i], ys[j]), (xs[i + 1], ys[j]), (xs[i + 1], ys[j + 1]), (xs[i], ys[j + 1]))

            def edge_point(e):
                a, b = e, (e + 1) % 4
                va, vb = c[a], c[b]
                t = 0.5 if va == vb else min(1.0, max(0.0, (level - va) / (vb - va)))
                return (
                    corners[a][0] + t * (corners[b][0] - corners[a][0]),
                    corners[a][1] + t * (corners[b][1] - corners[a][1]),
                )

            if code in (5, 10):
                centre_in = sum(c) / 4 < level
                # isolate the corners on the side the centre is not on
                if code == 5:
                    pairs = [(0, 1), (2, 3)] if centre_in else [(3, 0), (1, 2)]
                else:
                    pairs = [(3, 0), (1, 2)] if centre_in else [(0, 1), (2, 3)]
            else:
                pairs = _SEGMENTS[code]
            for e0, e1 in pairs:
                segments.append((edge_point(e0), edge_point(e1)))
    return segments


def grid_svg(grid: GridField, points=None, size: int = 400) -> str:
    """SVG with the region boundary (and optionally sample points) for a 2-D grid."""
    if grid.dimension != 2:
        raise ValueError("SVG rendering needs a 2-D grid")
    xs, ys = grid.axes()
    arr = grid.as_array()
    if grid.kind == "membership":
        segments = marching_squares(1.0 - arr, 0.5, xs, ys)
    else:
        segments = marching_squares(arr, grid.threshold, xs, ys)
    (x0, y0), (x1, y1) = grid.lower, grid.upper
    sx = size / (x1 - x0)
    sy = size / (y1 - y0)

    def px(x, y):
        return f"{(x - x0) * sx:.3f},{(y1 - y) * sy:.3f}"

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    if points is not None:
        for x, y in np.asarray(points)[:, :2]:
            lines.append(f'<circle cx="{(x - x0) * sx:.3f}" cy="{(y1 - y) * sy:.3f}" r="0.8" fill="black"/>')
    path = " ".join(f"M{px(*a)} L{px(*b)}" for a, b in segments)
    lines.append(f'<path d="{path}" stroke="purple" stroke-width="1.5" fill="none"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def write_grid(grid: GridField, stem, config: Optional[dict] = None, points=None) -> dict:
    """Write ``<stem>.csv``, ``<stem>.svg`` (2-D only) and ``<stem>.json``; returns the JSON document."""
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    cfg = config or {}
    digest = manifest_hash(cfg)
    csv_text = f"# manifest_sha256={digest}\n" + grid.to_csv()
    stem.with_suffix(".csv").write_text(csv_text)
    doc = {
        "kind": "grid",
        "config": cfg,
        "manifest_sha256": digest,
        "grid_kind": grid.kind,
        "lower": list(grid.lower),
        "upper": list(grid.upper),
        "resolution": grid.resolution,
        "threshold": grid.threshold,
    }
    if grid.dimension == 2:
        svg = grid_svg(grid, points)
        svg = svg.replace("<svg ", f"<!-- manifest_sha256={digest} -->\n<svg ", 1)
        stem.with_suffix(".svg").write_text(svg)
        doc["components"] = grid.components()
    stem.with_suffix(".json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return doc
