import math

import pytest

from translator_lab.geometry import make_rectangle_domain
from translator_lab.solver import solve

# filled by test_acceptance, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def pi4_L4():
    """b = pi/4, L = 4 on a 129 x 33 grid (dx = dy = pi/64 ... close to 1/16)."""
    return solve(make_rectangle_domain(4.0, math.pi / 4, 129, 33))


@pytest.fixture(scope="session")
def pi4_L8():
    return solve(make_rectangle_domain(8.0, math.pi / 4, 257, 33))


@pytest.fixture(scope="session")
def pi_L4():
    return solve(make_rectangle_domain(4.0, math.pi, 65, 65))
