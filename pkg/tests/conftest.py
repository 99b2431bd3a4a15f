import numpy as np
import pytest

from christoffel_reach.monomials import MonomialBasis


def refit_scores(points: np.ndarray, degree: int, queries: np.ndarray) -> np.ndarray:
    """Raw-sum Christoffel scores by explicit inversion; independent of the library's factorization."""
    basis = MonomialBasis(points.shape[1], degree)
    V = basis.evaluate(points)
    inv = np.linalg.inv(V.T @ V)
    Q = basis.evaluate(queries)
    return np.einsum("ij,jk,ik->i", Q, inv, Q)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance lines recorded by test_acceptance.py, echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
