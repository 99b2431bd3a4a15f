"""Benchmark systems, reach-set samplers and outlier injection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

FOUR_SQUARES = "four_squares"
UNIT_SQUARE = "unit_square"
STAR_REGION = "star_region"
DUFFING = "duffing"
CUSTOM_MAP = "custom_map"

DUFFING_DEFAULTS = {
    "alpha": 1.0,
    "beta": 1.0,
    "damping": 0.05,
    "gamma": 0.4,
    "omega": 1.3,
    "horizon": 10.0,
    "step": 0.01,
}

MAX_REJECTION_ATTEMPTS = 1_000_000


class UnsupportedOracleError(NotImplementedError):
    pass


class IntegrationError(FloatingPointError):
    pass


def star_vertices(points: int = 5, outer: float = 1.0, inner: Optional[float] = None) -> np.ndarray:
    """Vertices of a regular star polygon, first tip on the positive y axis."""
    if inner is None:
        # inner radius of the regular pentagram {5/2}
        inner = outer * math.cos(2 * math.pi / points) / math.cos(math.pi / points)
    angles = math.pi / 2 + np.arange(2 * points) * math.pi / points
    radii = np.where(np.arange(2 * points) % 2 == 0, outer, inner)
    return np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])


@dataclass(frozen=True)
class BenchmarkSystem:
    name: str
    lower: tuple
    upper: tuple
    parameters: dict = field(default_factory=dict)
    transition: Optional[Callable] = field(default=None, repr=False, compare=False)
    vertices: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.ndim != 1 or lo.shape != hi.shape or lo.size < 1:
            raise ValueError("initial box corners must be vectors of equal length >= 1")
        if np.any(lo > hi):
            raise ValueError("initial box corners must be ordered componentwise")
        if self.name == DUFFING:
            if self.parameters.get("step", 0) <= 0 or self.parameters.get("horizon", 0) <= 0:
                raise ValueError("duffing needs positive step and horizon")
        if self.name == CUSTOM_MAP and self.transition is None:
            raise ValueError("custom_map needs a transition function")

    @property
    def dimension(self) -> int:
        return len(self.lower)

    @property
    def has_oracle(self) -> bool:
        return self.name in (FOUR_SQUARES, UNIT_SQUARE, STAR_REGION)

    def manifest(self) -> dict:
        doc = {
            "system": self.name,
            "initial_set": {"lower": list(map(float, self.lower)), "upper": list(map(float, self.upper))},
            "parameters": dict(self.parameters),
        }
        if self.vertices is not None:
            doc["vertices"] = np.asarray(self.vertices).tolist()
        return doc


def four_squares() -> BenchmarkSystem:
    return BenchmarkSystem(FOUR_SQUARES, (-1.0, -1.0), (1.0, 1.0))


def unit_square() -> BenchmarkSystem:
    return BenchmarkSystem(UNIT_SQUARE, (-1.0, -1.0), (1.0, 1.0))


def star_region(vertices=None) -> BenchmarkSystem:
    verts = star_vertices() if vertices is None else np.asarray(vertices, dtype=float)
    return BenchmarkSystem(STAR_REGION, (-1.0, -1.0), (1.0, 1.0), vertices=verts)


def duffing(lower=(-0.95, -0.05), upper=(1.05, 0.05), **params) -> BenchmarkSystem:
    unknown = set(params) - set(DUFFING_DEFAULTS)
    if unknown:
        raise ValueError(f"unknown duffing parameters: {sorted(unknown)}")
    return BenchmarkSystem(DUFFING, tuple(lower), tuple(upper), {**DUFFING_DEFAULTS, **params})


def custom_map(transition: Callable, lower, upper) -> BenchmarkSystem:
    return BenchmarkSystem(CUSTOM_MAP, tuple(lower), tuple(upper), transition=transition)


def make_system(name: str, **kwargs) -> BenchmarkSystem:
    factories = {
        FOUR_SQUARES: four_squares,
        UNIT_SQUARE: unit_square,
        STAR_REGION: star_region,
        DUFFING: duffing,
    }
    if name not in factories:
        raise ValueError(f"unknown system {name!r}; choose from {sorted(factories)}")
    return factories[name](**kwargs)


def four_squares_map(points: np.ndarray) -> np.ndarray:
    """``x -> sgn(x) (1 + 2 x^2)`` per coordinate, with ``sgn(0) = +1``.

    Maps ``[-1, 1]^2`` onto ``([-3,-1] u [1,3])^2``.
    """
    sgn = np.where(points >= 0, 1.0, -1.0)
    return sgn * (1.0 + 2.0 * points**2)


def duffing_rhs(t, state, alpha, beta, damping, gamma, omega):
    x, v = state[..., 0], state[..., 1]
    acc = -damping * v + alpha * x - beta * x**3 + gamma * np.cos(omega * t)
    return np.stack([v, acc], axis=-1)


def rk4(rhs: Callable, state: np.ndarray, t0: float, horizon: float, step: float) -> np.ndarray:
    """Classical fixed-step Runge-Kutta; the last step is shortened to land on the horizon."""
    n_steps = int(math.ceil(horizon / step - 1e-9))
    t = t0
    y = np.array(state, dtype=float)
    for k in range(n_steps):
        h = min(step, t0 + horizon - t)
        k1 = rhs(t, y)
        k2 = rhs(t + h / 2, y + h / 2 * k1)
        k3 = rhs(t + h / 2, y + h / 2 * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = t0 + (k + 1) * step if k + 1 < n_steps else t0 + horizon
    return y


def duffing_flow(initial: np.ndarray, params: dict) -> np.ndarray:
    p = {**DUFFING_DEFAULTS, **params}

    def rhs(t, y):
        return duffing_rhs(t, y, p["alpha"], p["beta"], p["damping"], p["gamma"], p["omega"])

    return rk4(rhs, initial, 0.0, p["horizon"], p["step"])


def transition(system: BenchmarkSystem, initial: np.ndarray) -> np.ndarray:
    """Apply the one-step transition of ``system`` to points of the initial set."""
    pts = np.atleast_2d(np.asarray(initial, dtype=float))
    if system.name == FOUR_SQUARES:
        return four_squares_map(pts)
    if system.name in (UNIT_SQUARE, STAR_REGION):
        return pts.copy()
    if system.name == DUFFING:
        # divergence is reported below, so the overflow warnings are noise
        with np.errstate(over="ignore", invalid="ignore"):
            out = duffing_flow(pts, system.parameters)
        bad = ~np.all(np.isfinite(out), axis=1)
        if bad.any():
            first = pts[np.argmax(bad)]
            raise IntegrationError(f"duffing integration diverged from initial point {first.tolist()}")
        return out
    if system.name == CUSTOM_MAP:
        return np.atleast_2d(np.asarray(system.transition(pts), dtype=float))
    raise ValueError(f"unknown system {system.name!r}")


def _point_in_polygon(points: np.ndarray, vertices: np.ndarray) -> np.ndarray:
    # even-odd ray casting, plus an explicit on-edge test so the boundary counts as inside
    x, y = points[:, 0][:, None], points[:, 1][:, None]
    x0, y0 = vertices[:, 0][None, :], vertices[:, 1][None, :]
    nxt = np.roll(vertices, -1, axis=0)
    x1, y1 = nxt[:, 0][None, :], nxt[:, 1][None, :]
    crosses = (y0 > y) != (y1 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_at = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
    inside = np.sum(crosses & (x < x_at), axis=1) % 2 == 1
    ex, ey = x1 - x0, y1 - y0
    cross = ex * (y - y0) - ey * (x - x0)
    dot = (x - x0) * ex + (y - y0) * ey
    on_edge = (np.abs(cross) <= 1e-12) & (dot >= 0) & (dot <= ex**2 + ey**2)
    return inside | on_edge.any(axis=1)


def true_membership(system: BenchmarkSystem, x):
    """Exact indicator of the closed reach set, for systems that have one."""
    arr = np.asarray(x, dtype=float)
    pts = np.atleast_2d(arr)
    if not system.has_oracle:
        raise UnsupportedOracleError(f"system {system.name!r} has no closed-form reach set")
    if pts.shape[1] != system.dimension:
        raise ValueError(f"expected dimension {system.dimension}, got shape {arr.shape}")
    if system.name == FOUR_SQUARES:
        a = np.abs(pts)
        out = np.all((a >= 1.0) & (a <= 3.0), axis=1)
    elif system.name == UNIT_SQUARE:
        out = np.all(np.abs(pts) <= 1.0, axis=1)
    else:
        out = _point_in_polygon(pts, np.asarray(system.vertices))
    return bool(out[0]) if arr.ndim == 1 else out


@dataclass(frozen=True)
class LabeledDataset:
    points: np.ndarray
    labels: np.ndarray  # True = inlier
    seed: Optional[int]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.points) != len(self.labels):
            raise ValueError("points and labels differ in length")

    def __len__(self) -> int:
        return len(self.points)


def _uniform_box(rng: np.random.Generator, lower, upper, count: int) -> np.ndarray:
    lo = np.asarray(lower, dtype=float)
    hi = np.asarray(upper, dtype=float)
    return lo + (hi - lo) * rng.random((count, lo.size))


def sample_reach_set(system: BenchmarkSystem, count: int, seed: int) -> LabeledDataset:
    """Uniform draws in the initial box pushed through the transition map.

    The star region samples its polygon uniformly by rejection from the box.
    """
    if count < 1:
        raise ValueError(f"count must be positive, got {count}")
    rng = np.random.default_rng(seed)
    if system.name == STAR_REGION:
        kept = np.empty((0, 2))
        while kept.shape[0] < count:
            cand = _uniform_box(rng, system.lower, system.upper, 2 * count)
            kept = np.vstack([kept, cand[true_membership(system, cand)]])
        points = kept[:count]
    else:
        points = transition(system, _uniform_box(rng, system.lower, system.upper, count))
    return LabeledDataset(
        points=points,
        labels=np.ones(count, dtype=bool),
        seed=seed,
        provenance={**system.manifest(), "count": count, "seed": seed},
    )


def inject_outliers(
    dataset: LabeledDataset,
    fraction: float,
    outlier_box,
    seed: int,
    system: Optional[BenchmarkSystem] = None,
) -> LabeledDataset:
    """Replace ``floor(fraction * len(dataset))`` random points by outliers.

    Outliers are uniform in ``outlier_box = (lower, upper)``. When ``system``
    has a closed-form reach set, draws inside it are rejected.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must lie in (0, 1), got {fraction}")
    count = len(dataset)
    k = int(math.floor(fraction * count))
    provenance = {
        **dataset.provenance,
        "outliers": {
            "fraction": fraction,
            "count": k,
            "box": [list(map(float, outlier_box[0])), list(map(float, outlier_box[1]))],
            "seed": seed,
        },
    }
    if k == 0:
        return replace(dataset, provenance=provenance)
    rng = np.random.default_rng(seed)
    idx = rng.choice(count, size=k, replace=False)
    check = system is not None and system.has_oracle
    drawn = []
    n_drawn = 0
    attempts = 0
    while n_drawn < k:
        batch = max(2 * (k - n_drawn), 64)
        attempts += batch
        if attempts > MAX_REJECTION_ATTEMPTS:
            raise RuntimeError(
                "outlier rejection sampling exceeded 10^6 attempts; the outlier box lies mostly inside the reach set"
            )
        cand = _uniform_box(rng, outlier_box[0], outlier_box[1], batch)
        if check:
            cand = cand[~true_membership(system, cand)]
        drawn.append(cand)
        n_drawn += cand.shape[0]
    outliers = np.vstack(drawn)[:k]
    points = dataset.points.copy()
    labels = dataset.labels.copy()
    points[idx] = outliers
    labels[idx] = False
    return LabeledDataset(points=points, labels=labels, seed=dataset.seed, provenance=provenance)
