"""Shared fixtures; `--runslow` enables the full-resolution acceptance runs."""

import numpy as np
import pytest

from qlground.discretization import Grid2D, RadialGrid
from qlground.model import BUILTIN_NAMES, builtin_model


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run the slow acceptance tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-resolution acceptance run (needs --runslow)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def power():
    return builtin_model("power")


@pytest.fixture(scope="session")
def critical():
    return builtin_model("critical")


@pytest.fixture(scope="session")
def constant_power():
    return builtin_model("constant_V_power")


@pytest.fixture(params=BUILTIN_NAMES)
def any_model(request):
    return builtin_model(request.param)


@pytest.fixture(scope="session")
def small_grid():
    return Grid2D(6.0, 31)


@pytest.fixture(scope="session")
def radial_grid():
    return RadialGrid(6.0, 300)
