import numpy as np
import pytest

from sparse_fanet.array_model import ArrayGeometry
from sparse_fanet.tokens import build_grid


@pytest.fixture(scope="session")
def ula20():
    return ArrayGeometry.ula(20)


@pytest.fixture(scope="session")
def grid20(ula20):
    return build_grid(ula20)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
