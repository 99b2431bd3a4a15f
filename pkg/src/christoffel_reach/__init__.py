"""Data-driven reach-set estimation with Christoffel polynomials and conformal calibration."""

from .bounds import (
    BoundResult,
    conjecture_baseline_epsilon,
    robust_confidence,
    split_epsilon,
    split_upper_epsilon,
)
from .christoffel import (
    ChristoffelModel,
    InsufficientSamplesError,
    SingularMomentMatrixError,
    TransductiveContext,
    fit,
    make_transductive,
    score,
    transductive_scores,
)
from .conformal import (
    ReachSetEstimate,
    SamplePartition,
    TransductiveRegion,
    calibrate,
    calibrate_robust,
    membership,
    p_value,
    split,
    transductive_p_value,
    transductive_region,
)
from .monomials import MonomialBasis, basis_size, evaluate_basis
from .systems import (
    BenchmarkSystem,
    duffing,
    four_squares,
    inject_outliers,
    make_system,
    sample_reach_set,
    star_region,
    true_membership,
    unit_square,
)

__all__ = [
    "BenchmarkSystem",
    "BoundResult",
    "ChristoffelModel",
    "InsufficientSamplesError",
    "MonomialBasis",
    "ReachSetEstimate",
    "SamplePartition",
    "SingularMomentMatrixError",
    "TransductiveContext",
    "TransductiveRegion",
    "basis_size",
    "calibrate",
    "calibrate_robust",
    "conjecture_baseline_epsilon",
    "duffing",
    "evaluate_basis",
    "fit",
    "four_squares",
    "inject_outliers",
    "make_system",
    "make_transductive",
    "membership",
    "p_value",
    "robust_confidence",
    "sample_reach_set",
    "score",
    "split",
    "split_epsilon",
    "split_upper_epsilon",
    "star_region",
    "transductive_p_value",
    "transductive_region",
    "transductive_scores",
    "true_membership",
    "unit_square",
]
