import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

# share one q-table rectangle cache across the whole session
os.environ.setdefault(
    "SBMTC_TABLE_CACHE", os.path.join(os.path.dirname(__file__), "_table_cache")
)

from sbmtc.graphs import SimpleGraph  # noqa: E402


@pytest.fixture
def triangle():
    return SimpleGraph(3, [(0, 1), (0, 2), (1, 2)])


@pytest.fixture
def paw():
    return SimpleGraph(4, [(0, 1), (0, 2), (1, 2), (0, 3)])


@pytest.fixture
def bull():
    return SimpleGraph(5, [(0, 1), (0, 2), (1, 2), (1, 3), (2, 4)])


@pytest.fixture
def k4_minus_edge():
    return SimpleGraph(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3)])


def pytest_addoption(parser):
    parser.addoption(
        "--runslow", action="store_true", default=False,
        help="kept for compatibility; the full suite always runs",
    )
