import logging

import numpy as np
import pytest

from adiglm.methods import MethodId, get_method

logging.basicConfig(level=logging.DEBUG)
test_logger = logging.getLogger()


def pytest_addoption(parser):
    parser.addoption(
        "--slow",
        action="store_true",
        default=False,
        help="Run the full size convergence studies",
    )


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full size convergence study")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--slow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(scope="session")
def catalog_metadata() -> dict:
    yield {
        "orders": [2, 3, 4],
        "names": ["ADI-DIMSIM2", "ADI-DIMSIM3", "ADI-DIMSIM4"],
        "order_condition_tol": {2: 1e-12, 3: 1e-12, 4: 1e-10},
        "gamma": {2: 1 - np.sqrt(2) / 2, 3: 129981159316 / 298213221025, 4: 0.4},
    }


@pytest.fixture(scope="session")
def convergence_metadata() -> dict:
    yield {
        "n_points": 8,
        "steps": {2: [20, 40, 80, 160], 3: [20, 40, 80, 160], 4: [20, 40, 80, 160]},
        "slope_tol": 0.35,
    }


@pytest.fixture(scope="session", params=[MethodId.ADI_DIMSIM2, MethodId.ADI_DIMSIM3, MethodId.ADI_DIMSIM4])
def method(request):
    yield get_method(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(20221017)
