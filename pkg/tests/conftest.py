import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(20240901))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the acceptance criterion pass lines after the test run."""
    try:
        from test_acceptance import PASS_LINES
    except ImportError:
        return
    if PASS_LINES:
        terminalreporter.section("acceptance criteria")
        for line in PASS_LINES:
            terminalreporter.write_line(line)
