from importlib import resources

import numpy as np
import pytest

from signsvar import VarParams, load_restrictions

DATA = resources.files("signsvar") / "data"


def fixture_set(name, **kwargs):
    return load_restrictions(DATA / name, **kwargs)


def random_params(rng, n, p, scale=0.3):
    lags = rng.normal(0.0, scale / n, size=(p, n, n))
    a = rng.normal(size=(n, n))
    return VarParams(rng.normal(size=n), lags, a @ a.T + n * np.eye(n))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
