import pytest

from dynwalk.conductance_law import ConductanceLaw
from dynwalk.rng import RandomStream


@pytest.fixture
def rng():
    return RandomStream(12345)


@pytest.fixture
def elliptic():
    return ConductanceLaw.two_point(0.1, 1.0, 0.5, kappa=1.0)


@pytest.fixture
def percolation():
    return ConductanceLaw.two_point(0.0, 1.0, 0.5, kappa=1.0)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record a PASS/FAIL line for an acceptance criterion and return the verdict."""
    def emit(number: int, passed: bool, detail: str) -> bool:
        line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed
    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
