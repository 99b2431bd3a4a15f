"""Closed-form PAC guarantees for calibrated sublevel sets.

``split_epsilon`` and ``split_upper_epsilon`` bound the coverage of the
region thresholded at the largest of N calibration scores, from below and
from above. ``robust_confidence`` is the confidence that the region
thresholded at the (p+1)-th largest score covers at least ``1 - epsilon``
when up to p calibration points are outliers. ``conjecture_baseline_epsilon``
inverts the earlier sample-complexity bound for the uncalibrated max
threshold; it is a conjectured baseline, used for comparison only.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

SPLIT_LOWER = "split_lower"
SPLIT_UPPER = "split_upper"
SPLIT_TWO_SIDED = "split_two_sided"
ROBUST = "robust"
BASELINE = "baseline_conjecture"


@dataclass(frozen=True)
class BoundResult:
    """An evaluated guarantee.

    For split modes ``delta`` is the failure probability. For robust mode
    ``delta`` is ``1 - confidence`` and ``confidence`` is also stored.
    """

    mode: str
    epsilon: float
    delta: float
    N: int
    p: Optional[int] = None
    n: Optional[int] = None
    d: Optional[int] = None
    confidence: Optional[float] = None
    epsilon_upper: Optional[float] = None

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}

    @classmethod
    def from_dict(cls, doc: dict) -> "BoundResult":
        return cls(**doc)


def _check_unit(name: str, value: float) -> None:
    if not 0.0 < value < 1.0:
        raise ValueError(f"{name} must lie in (0, 1), got {value}")


def _check_count(N: int) -> None:
    if int(N) != N or N < 1:
        raise ValueError(f"N must be a positive integer, got {N}")


def split_epsilon(N: int, delta: float) -> float:
    """Coverage error ``1 - delta**(1/N)`` of the max-of-N calibrated region."""
    _check_count(N)
    _check_unit("delta", delta)
    return -math.expm1(math.log(delta) / N)


def split_upper_epsilon(N: int, delta: float) -> float:
    """Missing-mass floor ``1 - (1-delta)**(1/N)``.

    With probability at least ``1 - delta`` the region covers at most
    ``1 - split_upper_epsilon(N, delta)`` of the measure (continuous
    measures only).
    """
    _check_count(N)
    _check_unit("delta", delta)
    return -math.expm1(math.log1p(-delta) / N)


def split_delta(N: int, epsilon: float) -> float:
    """Inverse of :func:`split_epsilon`: ``(1 - epsilon)**N``."""
    _check_count(N)
    _check_unit("epsilon", epsilon)
    return math.exp(N * math.log1p(-epsilon))


def split_bound(N: int, delta: float) -> BoundResult:
    return BoundResult(SPLIT_LOWER, split_epsilon(N, delta), delta, N)


def split_two_sided(N: int, delta: float) -> BoundResult:
    """Coverage band ``[1 - eps, 1 - eps_upper]`` holding with probability ``1 - 2*delta``."""
    if not 0.0 < delta < 0.5:
        raise ValueError(f"two-sided band needs delta in (0, 1/2), got {delta}")
    return BoundResult(
        SPLIT_TWO_SIDED,
        split_epsilon(N, delta),
        2 * delta,
        N,
        epsilon_upper=split_upper_epsilon(N, delta),
    )


def _check_robust(N: int, p: int) -> None:
    _check_count(N)
    if int(p) != p or p < 0:
        raise ValueError(f"p must be a non-negative integer, got {p}")
    if not 2 * p + 1 < N:
        raise ValueError(f"outlier budget requires 2p+1 < N, got N={N}, p={p}")


def _binomial_tail(m: int, eps: float, lo: int, hi: int) -> float:
    """``sum_{i=lo}^{hi} C(m, i) eps^i (1-eps)^(m-i)``.

    The largest term in the range is anchored with an exact log binomial
    coefficient and the others follow from the term ratio, so no large
    log-gamma values have to cancel. Terms are accumulated with fsum.
    """
    if lo > hi:
        return 0.0
    odds = eps / (1.0 - eps)
    anchor = min(max(int(math.floor((m + 1) * eps)), lo), hi)
    log_anchor = math.log(math.comb(m, anchor)) + anchor * math.log(eps) + (m - anchor) * math.log1p(-eps)
    terms = [1.0]
    t = 1.0
    for i in range(anchor, hi):
        t *= (m - i) / (i + 1) * odds
        if t < 1e-300:
            break
        terms.append(t)
    t = 1.0
    for i in range(anchor, lo, -1):
        t *= i / (m - i + 1) / odds
        if t < 1e-300:
            break
        terms.append(t)
    return math.exp(log_anchor) * math.fsum(terms)


def robust_confidence(N: int, p: int, epsilon: float) -> float:
    """Confidence that the (p+1)-th-largest threshold covers ``1 - epsilon``.

    Evaluates ``sum_{i=p+1}^{N-p} C(N-p, i) eps^i (1-eps)^(N-p-i)``, the
    probability that at least p+1 of N-p uniforms fall below ``epsilon``.
    Whichever binomial tail holds less mass is summed directly; the other
    is its complement.
    """
    _check_robust(N, p)
    _check_unit("epsilon", epsilon)
    m = N - p
    if p + 1 > m * epsilon:
        value = _binomial_tail(m, epsilon, p + 1, m)
    else:
        value = 1.0 - _binomial_tail(m, epsilon, 0, p)
    return min(1.0, max(0.0, value))


def robust_bound(N: int, p: int, epsilon: float) -> BoundResult:
    conf = robust_confidence(N, p, epsilon)
    return BoundResult(ROBUST, epsilon, 1.0 - conf, N, p=p, confidence=conf)


def robust_table(sizes, epsilons, outlier_frac: float = 0.05) -> list[dict]:
    """Confidence grid with ``p = floor(outlier_frac * N)`` per row."""
    rows = []
    for N in sizes:
        p = int(math.floor(outlier_frac * N + 1e-9))
        rows.append(
            {
                "N": int(N),
                "p": p,
                "confidence": {f"{e:g}": robust_confidence(int(N), p, e) for e in epsilons},
            }
        )
    return rows


def conjecture_rhs(epsilon: float, n: int, d: int, delta: float) -> float:
    """Sample size demanded by the conjectured baseline at coverage error ``epsilon``."""
    return (5.0 / epsilon) * (
        math.log(4.0 / delta) + math.comb(n + 2 * d, n) * math.log(40.0 / epsilon)
    )


def conjecture_baseline_epsilon(
    N: int, n: int, d: int, delta: float, tol: float = 1e-6
) -> float:
    """Smallest epsilon in (0, 1) meeting the conjectured baseline sample bound.

    Conjectured only: the bound ignores the dependence between the fitted
    polynomial and the points that set the threshold. Never attach it to
    an estimate as a guarantee.
    """
    for name, val in (("N", N), ("n", n), ("d", d)):
        if int(val) != val or val < 1:
            raise ValueError(f"{name} must be a positive integer, got {val}")
    _check_unit("delta", delta)
    floor = conjecture_rhs(1.0, n, d, delta)
    if N < floor:
        raise ValueError(
            f"no epsilon in (0, 1) satisfies the baseline bound: N={N} is below the "
            f"minimum {math.ceil(floor)} reached as epsilon -> 1"
        )
    # rhs is decreasing in epsilon: rhs(lo) > N >= rhs(hi)
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if conjecture_rhs(mid, n, d, delta) > N:
            lo = mid
        else:
            hi = mid
    return hi


def baseline_bound(N: int, n: int, d: int, delta: float) -> BoundResult:
    return BoundResult(BASELINE, conjecture_baseline_epsilon(N, n, d, delta), delta, N, n=n, d=d)
