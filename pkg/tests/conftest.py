import numpy as np
import pytest

from dqdsim.core import DeviceParams

ACCEPTANCE_LINES = []


@pytest.fixture
def params():
    return DeviceParams()


@pytest.fixture
def unit_params():
    """hbar = 1 so pulse areas equal amplitude * duration."""
    return DeviceParams(hbar=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
