import pytest

import helpers
from delay_noether import load_bundled


def pytest_terminal_summary(terminalreporter):
    if helpers.ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in helpers.ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def bundle():
    """The bundled delayed-quadratic scenario document."""
    return load_bundled()


@pytest.fixture(scope="session")
def problem(bundle):
    return bundle.problem


@pytest.fixture(scope="session")
def traj_el_only(bundle):
    """Candidate satisfying the Euler-Lagrange conditions only."""
    return bundle.trajectory("el_only")


@pytest.fixture(scope="session")
def traj_el_dbr(bundle):
    """Candidate satisfying Euler-Lagrange and DuBois-Reymond conditions."""
    return bundle.trajectory("el_dbr")


@pytest.fixture(scope="session")
def symmetry(bundle):
    return bundle.symmetry
