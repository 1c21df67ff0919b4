import numpy as np
import pytest

import _acceptance_log
from pacctrl.sim import Environment


def pytest_terminal_summary(terminalreporter):
    if _acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_log.LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def empty_env():
    return Environment(np.zeros((0, 3)))
