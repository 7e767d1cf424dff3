import numpy as np
import pytest

from mcmi import make_mrp, random_mrp
from mcmi.rng import RngStream

ACCEPTANCE_LINES = []


@pytest.fixture
def two_cycle():
    return make_mrp([[0.0, 1.0], [1.0, 0.0]], [1.0, 0.0], 0.5)


@pytest.fixture
def single_state():
    return make_mrp([[1.0]], [1.0], 0.8)


@pytest.fixture
def five_state():
    return random_mrp(5, seed=RngStream(11), gamma=0.8)


def neumann_values(P, r, gamma, K):
    """sum_{k=0}^{K} gamma^k P^k r by repeated matrix-vector products."""
    term = np.asarray(r, dtype=float).copy()
    total = term.copy()
    for _ in range(K):
        term = gamma * (P @ term)
        total += term
    return total


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
