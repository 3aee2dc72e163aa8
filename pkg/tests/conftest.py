import numpy as np
import pytest

from boussinesq_voigt.spectral import Grid

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def grid16():
    return Grid(2, 16)


@pytest.fixture
def grid32():
    return Grid(2, 32)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
