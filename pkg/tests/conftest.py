import numpy as np
import pytest

from cpp_predict.conjugate import Dataset, PriorSpec


def random_spd(rng, p, scale=1.0):
    M = rng.standard_normal((p, p))
    return scale * (M @ M.T / p + 0.5 * np.eye(p))


def random_instance(rng, n, p, sigma2=None):
    X = rng.standard_normal((n, p))
    y = X @ rng.standard_normal(p) + rng.standard_normal(n)
    prior = PriorSpec(rng.standard_normal(p), random_spd(rng, p, 2.0), sigma2)
    return Dataset(X, y), prior


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def toy():
    """Two observations at x = 1 with responses 0 and 2, unit prior and noise."""
    return Dataset(np.ones((2, 1)), np.array([0.0, 2.0])), PriorSpec(np.zeros(1), np.eye(1), 1.0)


# filled by test_acceptance.py, one (criterion, passed, detail) triple per criterion
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
