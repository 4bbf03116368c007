import numpy as np
import pytest

from dirichlet_forms.ground_state import gaussian_wavefunction, ground_state_form
from dirichlet_forms.process import ground_state_chain
from dirichlet_forms.state_space import build_line_grid

ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")


@pytest.fixture(scope="session")
def ou_space():
    return build_line_grid(-6.0, 6.0, 601)


@pytest.fixture(scope="session")
def ou_psi(ou_space):
    return gaussian_wavefunction(ou_space)


@pytest.fixture(scope="session")
def ou_gs(ou_psi):
    return ground_state_form(ou_psi)


@pytest.fixture(scope="session")
def ou_chain(ou_psi):
    return ground_state_chain(ou_psi)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
