import numpy as np
import pytest

from spectraltn.graded import WireSpace, creation


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def ops1():
    """``c^dag, c, n, Z`` on a one-species wire."""
    cd = creation(WireSpace(1))
    c = cd.T.copy()
    return cd, c, cd @ c, np.diag([1.0, -1.0])


# one line per acceptance criterion, shown in the terminal summary
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
