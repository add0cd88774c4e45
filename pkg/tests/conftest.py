import numpy as np
import pytest

from pasa import BatchData, SimSpec
from pasa.data import simulate_full


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def make_batch(family, n, seed, beta0=(0.2, -0.2, 0.2, -0.2, 0.2)):
    return simulate_full(SimSpec(family, n, beta0=beta0, seed=seed))


def ols(X, y):
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    n, p = X.shape
    sigma2 = resid @ resid / (n - p)
    cov = sigma2 * np.linalg.inv(X.T @ X)
    return beta, sigma2, cov


def split_rows(batch: BatchData, sizes):
    out, start = [], 0
    for s in sizes:
        out.append(BatchData(batch.y[start:start + s], batch.X[start:start + s]))
        start += s
    assert start == batch.s
    return out


@pytest.fixture
def gaussian_data():
    return make_batch("gaussian", 2000, seed=11)


@pytest.fixture
def logistic_data():
    return make_batch("bernoulli", 2000, seed=12)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(mod.RESULTS, key=int):
        terminalreporter.write_line(mod.format_line(key))
