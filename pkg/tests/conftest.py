import sys
from pathlib import Path

import pytest

from popsdp.polynomial import Polynomial
from popsdp.pop import Pop

sys.path.insert(0, str(Path(__file__).parent))

DATA = Path(__file__).parent / "data"


@pytest.fixture
def xs():
    return Polynomial.variable(2, 0), Polynomial.variable(2, 1)


@pytest.fixture
def schweighofer(xs):
    x1, x2 = xs
    return Pop(2, x1 * x2, (x1 + 1, 1 - x1, -(x2 * x2)))


@pytest.fixture
def unit_disk(xs):
    x1, x2 = xs
    return Pop(2, x1, (1 - x1 * x1 - x2 * x2,))


@pytest.fixture
def disk_x1x2(xs):
    x1, x2 = xs
    return Pop(2, x1 * x2, (1 - x1 * x1 - x2 * x2,))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(lines):
        terminalreporter.write_line(lines[key])
