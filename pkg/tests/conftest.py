import numpy as np
import pytest

from qpfisher import PhysicalConstants, make_grid
from qpfisher.evolution import analytic_free_gaussian

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def consts():
    return PhysicalConstants()


@pytest.fixture(scope="session")
def grid():
    """Standard box: [-20, 20] with 4096 points."""
    return make_grid(1, (-20.0, 20.0), 4096)


@pytest.fixture(scope="session")
def gauss(grid, consts):
    def make(sigma=1.0, x0=0.0):
        return analytic_free_gaussian(sigma, x0, 0.0, 0.0, consts, grid)

    return make


@pytest.fixture
def at(grid):
    """Index of the grid point nearest to x."""

    def index(x):
        return int(np.argmin(np.abs(grid.x - x)))

    return index


@pytest.fixture
def criterion():
    """Record a one-line PASS/FAIL verdict for the acceptance summary."""

    def record(number, title, ok, detail):
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title} ({detail})")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
