import numpy as np
import pytest

import _criteria


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _criteria.LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_criteria.LINES):
        terminalreporter.write_line(line)
