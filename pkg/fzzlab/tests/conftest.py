import os
import sys

import pytest

# the project directory holds the src package and the suite scripts
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.core import make_params
from src.dist import stream

SEED = 7


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run long Monte Carlo checks")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long Monte Carlo acceptance run (needs --runslow)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return stream(SEED, 0)


@pytest.fixture
def params_g1():
    return make_params(1.0)
