"""Conformal calibration of Christoffel sublevel sets.

Split calibration thresholds the fitted polynomial at the largest score
of a held-out calibration set; the outlier-robust variant uses the
(p+1)-th largest instead. The transductive variant needs no calibration
set: each query is appended to the training set and ranked against the
updated training scores.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import bounds
from .christoffel import ChristoffelModel, TransductiveContext, transductive_scores
from .bounds import BoundResult

# relative slack when comparing rank-one updated scores; see transductive_p_value
TRANSDUCTIVE_TIE_RTOL = 1e-10


class DuplicateScoreWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SamplePartition:
    training: np.ndarray
    calibration: np.ndarray
    seed: Optional[int]
    training_index: np.ndarray = field(repr=False)
    calibration_index: np.ndarray = field(repr=False)
    outlier_labels: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def calibration_inliers(self) -> Optional[np.ndarray]:
        if self.outlier_labels is None:
            return None
        return self.outlier_labels[self.calibration_index]


def split(points, n_calibration: int, seed: Optional[int] = 0, labels=None) -> SamplePartition:
    """Shuffle ``points`` with ``seed`` and take the first ``n_calibration`` as calibration.

    ``labels`` (True = inlier) are carried along, indexed like ``points``.
    ``seed=None`` keeps the input order.
    """
    pts = np.asarray(points, dtype=float)
    m = pts.shape[0]
    if not 1 <= n_calibration < m:
        raise ValueError(f"need 1 <= n_calibration < {m}, got {n_calibration}")
    order = np.arange(m) if seed is None else np.random.default_rng(seed).permutation(m)
    cal_idx = order[:n_calibration]
    train_idx = order[n_calibration:]
    return SamplePartition(
        training=pts[train_idx],
        calibration=pts[cal_idx],
        seed=seed,
        training_index=train_idx,
        calibration_index=cal_idx,
        outlier_labels=None if labels is None else np.asarray(labels, dtype=bool),
    )


@dataclass(frozen=True)
class ReachSetEstimate:
    """Sublevel set ``{x : score(x) <= threshold}`` with its guarantee."""

    model: ChristoffelModel
    threshold: float
    rank: int
    guarantee: Optional[BoundResult] = None
    calibration_scores: Optional[np.ndarray] = field(default=None, repr=False)

    def contains(self, x):
        return self.model.score(x) <= self.threshold

    def p_value(self, x):
        if self.calibration_scores is None:
            raise ValueError("estimate carries no calibration scores")
        return p_value(self.calibration_scores, self.model.score(x))

    def to_dict(self) -> dict:
        doc = {
            "kind": "reach_set_estimate",
            "threshold": self.threshold,
            "rank": self.rank,
            "guarantee": None if self.guarantee is None else self.guarantee.to_dict(),
            "model": self.model.to_dict(),
        }
        if self.calibration_scores is not None:
            doc["calibration_scores"] = self.calibration_scores.tolist()
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ReachSetEstimate":
        if doc.get("kind") != "reach_set_estimate":
            raise ValueError("not a reach_set_estimate document")
        cal = doc.get("calibration_scores")
        return cls(
            model=ChristoffelModel.from_dict(doc["model"]),
            threshold=float(doc["threshold"]),
            rank=int(doc["rank"]),
            guarantee=None if doc.get("guarantee") is None else BoundResult.from_dict(doc["guarantee"]),
            calibration_scores=None if cal is None else np.asarray(cal, dtype=float),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "ReachSetEstimate":
        return cls.from_dict(json.loads(text))


def _calibration_scores(model: ChristoffelModel, calibration) -> np.ndarray:
    cal = np.atleast_2d(np.asarray(calibration, dtype=float))
    if cal.size == 0:
        raise ValueError("calibration set is empty")
    scores = np.atleast_1d(model.score(cal))
    if np.unique(scores).size < scores.size:
        warnings.warn(
            "duplicate calibration scores; the upper coverage bound assumes a "
            "continuous score distribution and is not claimed here",
            DuplicateScoreWarning,
            stacklevel=3,
        )
    return scores


def threshold_at_rank(scores, rank: int) -> float:
    """The ``rank``-th largest value (1-based), ties kept as-is."""
    scores = np.asarray(scores, dtype=float)
    if not 1 <= rank <= scores.size:
        raise ValueError(f"rank must lie in [1, {scores.size}], got {rank}")
    ordered = -np.sort(-scores, kind="stable")
    return float(ordered[rank - 1])


def calibrate(model: ChristoffelModel, calibration, delta: float = 0.01) -> ReachSetEstimate:
    """Threshold at the largest calibration score.

    The attached guarantee: with probability ``1 - delta`` the region
    covers at least ``1 - epsilon`` with ``epsilon = 1 - delta**(1/N)``.
    """
    scores = _calibration_scores(model, calibration)
    return ReachSetEstimate(
        model=model,
        threshold=float(scores.max()),
        rank=1,
        guarantee=bounds.split_bound(scores.size, delta),
        calibration_scores=scores,
    )


def calibrate_robust(
    model: ChristoffelModel, calibration, p: int, epsilon: float = 0.05
) -> ReachSetEstimate:
    """Threshold at the (p+1)-th largest calibration score, tolerating p outliers."""
    scores = _calibration_scores(model, calibration)
    N = scores.size
    if not 2 * p + 1 < N:
        raise ValueError(f"outlier budget requires 2p+1 < N, got N={N}, p={p}")
    return ReachSetEstimate(
        model=model,
        threshold=threshold_at_rank(scores, p + 1),
        rank=p + 1,
        guarantee=bounds.robust_bound(N, p, epsilon),
        calibration_scores=scores,
    )


def p_value(calibration_scores, x_score):
    """Fraction of calibration scores at least ``x_score``; vectorized over ``x_score``."""
    cal = np.sort(np.asarray(calibration_scores, dtype=float))
    xs = np.asarray(x_score, dtype=float)
    count = cal.size - np.searchsorted(cal, xs, side="left")
    out = count / cal.size
    return float(out) if out.ndim == 0 else out


def membership(estimate: ReachSetEstimate, x):
    """``score(x) <= threshold``, exact comparison."""
    out = estimate.contains(x)
    return bool(out) if np.ndim(out) == 0 else out


def transductive_p_value(ctx: TransductiveContext, x, batch: int = 2048):
    """p-value of ``x`` against the training set with ``x`` appended.

    The augmented score of a training point equal to ``x`` and the score
    of ``x`` itself agree algebraically but come from different floating
    point routes, so ties are detected with relative slack
    ``TRANSDUCTIVE_TIE_RTOL``.
    """
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    out = np.empty(pts.shape[0])
    for start in range(0, pts.shape[0], batch):
        chunk = pts[start : start + batch]
        own, augmented = transductive_scores(ctx, chunk)
        cut = own * (1.0 - TRANSDUCTIVE_TIE_RTOL)
        out[start : start + batch] = (augmented >= cut[:, None]).sum(axis=1) / ctx.n_train
    return float(out[0]) if single else out


@dataclass(frozen=True)
class TransductiveRegion:
    """``{x : p_value(x) >= level / N}``; ``level=1`` is the analogue of the max threshold."""

    context: TransductiveContext
    level: int = 1
    guarantee: Optional[BoundResult] = None

    def contains(self, x):
        pv = np.asarray(transductive_p_value(self.context, x))
        return pv * self.context.n_train >= self.level - 0.5


def transductive_region(ctx: TransductiveContext, delta: float = 0.01) -> TransductiveRegion:
    return TransductiveRegion(ctx, 1, bounds.split_bound(ctx.n_train, delta))
