import numpy as np
import pytest

from slabdg import ProblemSpec, build_mesh, build_quadrature
from slabdg.config import FunctionSpec

# one "[PASS]/[FAIL] criterion N: ..." line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])


@pytest.fixture(scope="session")
def bump():
    """Unit-mass mollifier on |x| < 1/8."""
    return FunctionSpec("bump", (0.125, 1.0)).build()


@pytest.fixture(scope="session")
def slab_spec(bump):
    """Factory for the bump-source slab problem with isotropic inflow 0.1 on the left."""

    def make(eps, left=0.1, right=0.0, source=None):
        return ProblemSpec(2.0, 1.0, eps, bump if source is None else source, left, right)

    return make


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def quad4():
    return build_quadrature(4)


@pytest.fixture(scope="session")
def mesh8():
    return build_mesh(-1.0, 1.0, 8)
