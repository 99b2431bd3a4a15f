"""Empirical moment matrix and Christoffel polynomial.

The score of a point ``x`` is the quadratic form ``v(x)^T M^{-1} v(x)``,
where ``v`` is the monomial vector and ``M`` the empirical moment matrix
of the training samples. High scores mean atypical points.

Two normalizations exist. The split-conformal path uses ``M = (1/N) sum
v v^T``. The transductive path uses the raw sum ``M = sum v v^T``, for
which appending one point is an exact rank-one update. A global rescaling
of ``M`` multiplies every score by the same constant, so rankings,
p-values and conformal regions agree between the two.

The triangular factor ``R`` with ``R^T R = M`` is obtained from a QR
decomposition of the stacked monomial vectors instead of a Cholesky
decomposition of ``M``. Both give the same factor, but QR works with the
condition number of the data matrix rather than its square, which matters
at degree 15 and above.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import solve_triangular

from .monomials import ORDERING, MonomialBasis

NORMALIZED = "normalized"
UNNORMALIZED = "unnormalized"


class InsufficientSamplesError(ValueError):
    pass


class SingularMomentMatrixError(np.linalg.LinAlgError):
    pass


def _as_points(x, dimension: int, what: str = "points") -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    pts = np.atleast_2d(arr)
    if pts.ndim != 2 or pts.shape[1] != dimension:
        raise ValueError(f"{what} must have dimension {dimension}, got shape {arr.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError(f"{what} contain NaN or infinite coordinates")
    return pts, single


@dataclass(frozen=True)
class AffineRescale:
    """Coordinate-wise map ``x -> offset + scale * x``."""

    offset: np.ndarray
    scale: np.ndarray

    @classmethod
    def to_unit_box(cls, points: np.ndarray) -> "AffineRescale":
        lo = points.min(axis=0)
        hi = points.max(axis=0)
        width = hi - lo
        width = np.where(width > 0, width, 1.0)
        scale = 2.0 / width
        offset = -1.0 - scale * lo
        return cls(offset=offset, scale=scale)

    def apply(self, points: np.ndarray) -> np.ndarray:
        return self.offset + self.scale * points


@dataclass(frozen=True)
class ChristoffelModel:
    basis: MonomialBasis
    moment_matrix: np.ndarray = field(repr=False)
    factor: np.ndarray = field(repr=False)  # upper triangular R, R^T R = moment_matrix + ridge*I
    rescale: Optional[AffineRescale]
    n_train: int
    normalization: str = NORMALIZED
    ridge: float = 0.0

    @property
    def dimension(self) -> int:
        return self.basis.dimension

    @property
    def degree(self) -> int:
        return self.basis.degree

    def features(self, x) -> tuple[np.ndarray, bool]:
        pts, single = _as_points(x, self.dimension)
        if self.rescale is not None:
            pts = self.rescale.apply(pts)
        return self.basis.evaluate(pts), single

    def whiten(self, features: np.ndarray) -> np.ndarray:
        """Return ``R^{-T} v`` for each row ``v`` of ``features``, shape ``(m, s)``."""
        return solve_triangular(self.factor, features.T, trans="T", lower=False).T

    def score(self, x):
        feats, single = self.features(x)
        z = self.whiten(feats)
        out = np.einsum("ij,ij->i", z, z)
        return float(out[0]) if single else out

    def to_dict(self) -> dict:
        return {
            "kind": "christoffel_model",
            "basis": {
                "dimension": self.dimension,
                "degree": self.degree,
                "ordering": ORDERING,
            },
            "rescale": None
            if self.rescale is None
            else {
                "offset": self.rescale.offset.tolist(),
                "scale": self.rescale.scale.tolist(),
            },
            "normalization": self.normalization,
            "n_train": self.n_train,
            "ridge": self.ridge,
            "moment_matrix": self.moment_matrix.ravel().tolist(),
            "factor": self.factor.ravel().tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ChristoffelModel":
        if doc.get("kind") != "christoffel_model":
            raise ValueError("not a christoffel_model document")
        b = doc["basis"]
        if b.get("ordering", ORDERING) != ORDERING:
            raise ValueError(f"unsupported basis ordering {b['ordering']!r}")
        basis = MonomialBasis(int(b["dimension"]), int(b["degree"]))
        s = basis.size
        rescale = None
        if doc.get("rescale") is not None:
            rescale = AffineRescale(
                offset=np.asarray(doc["rescale"]["offset"], dtype=float),
                scale=np.asarray(doc["rescale"]["scale"], dtype=float),
            )
        moment = np.asarray(doc["moment_matrix"], dtype=float).reshape(s, s)
        ridge = float(doc.get("ridge", 0.0))
        if "factor" in doc:
            factor = np.asarray(doc["factor"], dtype=float).reshape(s, s)
        else:
            factor = _cholesky_upper(moment + ridge * np.eye(s), ridge)
        return cls(
            basis=basis,
            moment_matrix=moment,
            factor=factor,
            rescale=rescale,
            n_train=int(doc["n_train"]),
            normalization=doc.get("normalization", NORMALIZED),
            ridge=ridge,
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "ChristoffelModel":
        return cls.from_dict(json.loads(text))


def _cholesky_upper(matrix: np.ndarray, ridge: float) -> np.ndarray:
    try:
        return np.linalg.cholesky(matrix).T
    except np.linalg.LinAlgError as exc:
        raise _singular(ridge) from exc


def _singular(ridge: float) -> SingularMomentMatrixError:
    return SingularMomentMatrixError(
        "moment matrix is numerically singular"
        + (" even with ridge={}".format(ridge) if ridge > 0 else "")
        + "; use a positive ridge, a lower degree, or more (distinct) samples"
    )


def _triangular_factor(features: np.ndarray, weight: float, ridge: float) -> np.ndarray:
    """Upper triangular R with R^T R = weight * F^T F + ridge * I."""
    s = features.shape[1]
    stacked = np.sqrt(weight) * features
    if ridge > 0:
        stacked = np.vstack([stacked, np.sqrt(ridge) * np.eye(s)])
    r = np.linalg.qr(stacked, mode="r")
    signs = np.where(np.diag(r) < 0, -1.0, 1.0)
    r = signs[:, None] * r
    diag = np.diag(r)
    # rank test on the data matrix, same rule numpy uses for matrix_rank
    if not np.all(np.isfinite(r)) or diag.min() <= diag.max() * s * np.finfo(float).eps:
        raise _singular(ridge)
    return r


def fit(
    samples,
    basis: MonomialBasis,
    rescale: bool = True,
    ridge: float = 0.0,
    normalization: str = NORMALIZED,
) -> ChristoffelModel:
    """Fit the empirical moment matrix of ``samples`` on ``basis``.

    Parameters
    ----------
    samples : array_like, shape (N, n)
        Training points.
    basis : MonomialBasis
        Monomial basis; fixes ``n`` and the degree.
    rescale : bool
        Map the training bounding box to ``[-1, 1]^n`` before evaluating
        monomials. The map is stored and applied to every query.
    ridge : float
        Non-negative multiple of the identity added before factorization.
    normalization : {"normalized", "unnormalized"}
        Divide the sum of outer products by ``N`` or not.

    Raises
    ------
    InsufficientSamplesError
        Fewer samples than basis elements.
    SingularMomentMatrixError
        The (ridge-adjusted) moment matrix is not positive definite.
    """
    if ridge < 0:
        raise ValueError(f"ridge must be non-negative, got {ridge}")
    if normalization not in (NORMALIZED, UNNORMALIZED):
        raise ValueError(f"unknown normalization {normalization!r}")
    pts, _ = _as_points(samples, basis.dimension, "samples")
    n_train = pts.shape[0]
    if n_train < basis.size:
        raise InsufficientSamplesError(
            f"need at least s(d)={basis.size} samples for n={basis.dimension}, "
            f"d={basis.degree}; got {n_train}"
        )
    affine = AffineRescale.to_unit_box(pts) if rescale else None
    if affine is not None:
        pts = affine.apply(pts)
    feats = basis.evaluate(pts)
    weight = 1.0 / n_train if normalization == NORMALIZED else 1.0
    moment = weight * (feats.T @ feats)
    moment = 0.5 * (moment + moment.T)
    factor = _triangular_factor(feats, weight, ridge)
    return ChristoffelModel(
        basis=basis,
        moment_matrix=moment,
        factor=factor,
        rescale=affine,
        n_train=n_train,
        normalization=normalization,
        ridge=float(ridge),
    )


def score(model: ChristoffelModel, x):
    """Christoffel polynomial value(s) of ``model`` at ``x``."""
    return model.score(x)


@dataclass(frozen=True)
class TransductiveContext:
    """Raw-sum model plus the per-training-point quantities needed for
    rank-one updates: the base scores and ``y_i = M^{-1} v(x_i)``."""

    model: ChristoffelModel
    base_scores: np.ndarray = field(repr=False)
    precomputed_vectors: np.ndarray = field(repr=False)

    @property
    def n_train(self) -> int:
        return self.base_scores.shape[0]


def make_transductive(
    samples, basis: MonomialBasis, rescale: bool = True, ridge: float = 0.0
) -> TransductiveContext:
    model = fit(samples, basis, rescale=rescale, ridge=ridge, normalization=UNNORMALIZED)
    feats, _ = model.features(samples)
    z = model.whiten(feats)
    base = np.einsum("ij,ij->i", z, z)
    y = solve_triangular(model.factor, z.T, lower=False).T
    return TransductiveContext(model=model, base_scores=base, precomputed_vectors=y)


def transductive_scores(ctx: TransductiveContext, x):
    """Scores after appending ``x`` to the training set.

    Returns ``(score_at_x, augmented_scores)``. For a single point these
    are a float and an array of length N; for ``m`` points, arrays of
    shape ``(m,)`` and ``(m, N)``.
    """
    feats, single = ctx.model.features(x)
    z = ctx.model.whiten(feats)
    lam = np.einsum("ij,ij->i", z, z)
    denom = 1.0 + lam
    cross = feats @ ctx.precomputed_vectors.T
    augmented = ctx.base_scores[None, :] - cross**2 / denom[:, None]
    own = lam / denom
    if single:
        return float(own[0]), augmented[0]
    return own, augmented
