"""Monomial basis of n-variate polynomials of degree at most d.

Exponents are kept in graded lexicographic order: total degree ascending,
and within one degree block, exponent tuples in descending lexicographic
order. For n=2, d=2 this gives ``[1, x1, x2, x1^2, x1*x2, x2^2]``.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

ORDERING = "graded-lex"


class BasisSizeError(OverflowError):
    pass


def basis_size(n: int, d: int) -> int:
    """Number of monomials of degree <= d in n variables, C(n+d, n)."""
    if n < 1 or d < 0:
        raise ValueError(f"need n >= 1 and d >= 0, got n={n}, d={d}")
    # C(n+d, k) for k = 1..n, exact at every step
    size = 1
    for k in range(1, n + 1):
        size = size * (d + k) // k
        if size > sys.maxsize:
            raise BasisSizeError(f"basis size C({n}+{d}, {n}) exceeds the platform integer range")
    return size


def _compositions(n: int, total: int):
    # descending lexicographic order of exponent tuples summing to `total`
    if n == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(n - 1, total - first):
            yield (first,) + rest


@lru_cache(maxsize=64)
def _exponent_table(n: int, d: int) -> np.ndarray:
    rows = [alpha for k in range(d + 1) for alpha in _compositions(n, k)]
    table = np.array(rows, dtype=np.int64).reshape(len(rows), n)
    table.setflags(write=False)
    return table


@dataclass(frozen=True)
class MonomialBasis:
    """Canonical monomial basis for dimension ``dimension`` and degree ``degree``."""

    dimension: int
    degree: int
    exponents: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.dimension < 1 or self.degree < 0:
            raise ValueError(
                f"need dimension >= 1 and degree >= 0, got {self.dimension}, {self.degree}"
            )
        basis_size(self.dimension, self.degree)
        object.__setattr__(self, "exponents", _exponent_table(self.dimension, self.degree))

    @property
    def size(self) -> int:
        return self.exponents.shape[0]

    def __len__(self) -> int:
        return self.size

    def evaluate(self, x) -> np.ndarray:
        """Evaluate the basis at one point (shape ``(n,)``) or many (shape ``(m, n)``).

        Returns shape ``(s,)`` or ``(m, s)`` respectively.
        """
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        points = np.atleast_2d(x)
        if points.ndim != 2 or points.shape[1] != self.dimension:
            raise ValueError(
                f"expected points of dimension {self.dimension}, got shape {x.shape}"
            )
        m = points.shape[0]
        # powers[k, :, j] = x_k ** j, built by repeated multiplication
        powers = np.empty((self.dimension, m, self.degree + 1))
        powers[:, :, 0] = 1.0
        for j in range(1, self.degree + 1):
            powers[:, :, j] = powers[:, :, j - 1] * points.T
        out = np.ones((m, self.size))
        for k in range(self.dimension):
            out *= powers[k][:, self.exponents[:, k]]
        return out[0] if single else out


def evaluate_basis(basis: MonomialBasis, x) -> np.ndarray:
    return basis.evaluate(x)
