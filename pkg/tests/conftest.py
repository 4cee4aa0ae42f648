import numpy as np
import pytest

from dgles.gas import GasParameters
from dgles.mesh import ChannelMeshSpec, build_mesh
from dgles.solver import LDGSolver

# criterion number -> (passed, detail), filled by test_acceptance.py
ACCEPTANCE = {}


def record(criterion, passed, detail):
    ACCEPTANCE[criterion] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def params():
    return GasParameters(0.5, 200.0)


@pytest.fixture(scope="session")
def small_mesh():
    return build_mesh(ChannelMeshSpec(2, 2, 2, 2.0, 1.5, omega=1.2))


@pytest.fixture(scope="session")
def periodic_mesh():
    return build_mesh(ChannelMeshSpec(2, 2, 2, 2.0, 1.5, omega=0.7, periodic_y=True))


@pytest.fixture(scope="session")
def small_solver(small_mesh, params):
    return LDGSolver(small_mesh, 2, params)
