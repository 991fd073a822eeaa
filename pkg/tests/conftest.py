import pytest

from dphase.eigen import li_diagnostic, spectrum_constants
from dphase.energy import ProblemParams
from dphase.grid import build_grid
from dphase.optim import SolverOptions
from dphase.orlicz import WeightSpec

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def spec101():
    """p=3, q=2, a=1 on the unit interval with 101 nodes."""
    grid = build_grid(1, 1.0, 101)
    return spectrum_constants(3.0, 2.0, WeightSpec.constant(1.0), grid, SolverOptions())


@pytest.fixture(scope="session")
def li101(spec101):
    return li_diagnostic(spec101.pa.phi, spec101.q.phi)


@pytest.fixture(scope="session")
def base101(spec101):
    return ProblemParams(spec101.exponents, spec101.weight, 0.0, 0.0)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
