import pytest

from wslatency.engine import ReferenceSimulation
from wslatency.model import SimConfig

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def make_sim():
    def _make(W, p, lam, seed=0, observer=None):
        return ReferenceSimulation(SimConfig(W, p, lam, seed), observer=observer)

    return _make
