import itertools
import math

import numpy as np
import pytest

from rankglm.ranklik import Dataset


def random_data(n, d, seed=0, beta=None, delta=False):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    b = np.zeros(d) if beta is None else np.asarray(beta, dtype=float)
    y = X @ b + rng.standard_normal(n)
    dl = (rng.random(n) < 0.7).astype(float) if delta else None
    if dl is not None:
        dl[:2] = 1.0
    return Dataset(y, X, dl)


def naive_loglik(y, X, beta, delta=None):
    """Direct double loop over pairs with log(1 + R) evaluated literally."""
    n = len(y)
    w = np.ones(n) if delta is None else np.asarray(delta, dtype=float)
    total = 0.0
    for i, j in itertools.combinations(range(n), 2):
        r = math.exp(-(y[i] - y[j]) * float(np.dot(beta, X[i] - X[j])))
        total += w[i] * w[j] * math.log(1.0 + r)
    return -total / (n * (n - 1) / 2)


@pytest.fixture
def small():
    return random_data(8, 4, seed=3, beta=[0.5, -0.3, 0.0, 0.2])


# one line per acceptance criterion, repeated in the terminal summary so
# the verdicts are visible even when test output is captured
ACCEPTANCE_LINES: list[str] = []


def report_criterion(line: str):
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
