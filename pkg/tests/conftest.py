import warnings

import numpy as np
import pytest

from pkrdh import default_params, keygen, toy_params
from pkrdh.errors import SecurityWarning


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def toy():
    return toy_params()


@pytest.fixture(scope="session")
def toy_keys(toy):
    return keygen(toy, np.random.default_rng(7))


@pytest.fixture(scope="session")
def default_keys():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SecurityWarning)
        params = default_params()
    return keygen(params, np.random.default_rng(11))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
