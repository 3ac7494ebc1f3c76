import numpy as np
import pytest
from hypothesis import settings

from gaussimag.envs import EnvSpec

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def two_arm_spec():
    return EnvSpec(2, [1, 1], [1, 1], [0.5, 0.5], np.eye(2), 9.0, 200)


@pytest.fixture
def optimistic_spec():
    return EnvSpec(2, [2, 2], [2, 2], [0.7, 0.7], np.eye(2), 3.0, 500)


_CRITERION_LINES = []


@pytest.fixture
def report_line():
    """Collect a summary line that is echoed after the run even when output is captured."""
    return _CRITERION_LINES.append


def pytest_terminal_summary(terminalreporter):
    if _CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERION_LINES:
            terminalreporter.write_line(line)
