import numpy as np
import pytest
from hypothesis import strategies as st

from kcontingency import problems


@pytest.fixture(scope="session")
def tiger():
    return problems.tiger()


@pytest.fixture(scope="session")
def maze():
    return problems.hz_maze()


@pytest.fixture(scope="session")
def grid():
    return problems.grid10x10()


def random_beliefs(n_states, count, seed=0):
    """Dirichlet(1) draws plus a few sparse ones (faces of the simplex)."""
    rng = np.random.default_rng(seed)
    X = rng.dirichlet(np.ones(n_states), size=count)
    for i in range(0, count, 7):
        mask = rng.random(n_states) < 0.5
        if mask.any():
            X[i] = np.where(mask, X[i], 0.0)
            X[i] /= X[i].sum()
    return X


def beliefs(n_states):
    """Hypothesis strategy for points of the probability simplex."""
    weights = st.lists(st.floats(0.0, 1.0, allow_nan=False), min_size=n_states, max_size=n_states)
    return weights.filter(lambda w: sum(w) > 1e-3).map(lambda w: np.array(w) / sum(w))


# -- acceptance verdict lines ------------------------------------------------

ACCEPTANCE: dict = {}


def record_criterion(number, title, passed, detail=""):
    ACCEPTANCE[number] = (title, passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        line = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
