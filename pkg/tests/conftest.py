import numpy as np
import pytest

from mrddi.data import make_dataset
from mrddi.simulation import COVARIATE_NAMES, gen_covariates, gen_outcome, gen_treatment_mnl


def one_per_arm(y=(0.0, 1.0, 1.0, 0.0), x=(1.0, 2.0, 3.0, 4.0)):
    """Four rows, one per arm: (1,1), (1,0), (0,1), (0,0)."""
    return make_dataset(y, [1, 1, 0, 0], [1, 0, 1, 0], np.asarray(x)[:, None], ["X1"])


def dgp_a_sample(n, seed, gamma0=0.0, xi=1.0):
    g = np.random.default_rng(seed)
    X = gen_covariates(n, g)
    a, b = gen_treatment_mnl(X, gamma0, g)
    y = gen_outcome(X, a, b, xi, g)
    return make_dataset(y, a, b, X, COVARIATE_NAMES)


@pytest.fixture
def tiny():
    return one_per_arm()


@pytest.fixture(scope="session")
def dgp_a_2000():
    return dgp_a_sample(2000, 11)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
