import numpy as np
import pytest

from sqlsim.model import PhysicalParams, validate_params


@pytest.fixture
def fig1():
    return validate_params(PhysicalParams())


@pytest.fixture
def fig1_chain():
    return validate_params(PhysicalParams(tau=1e-9))


@pytest.fixture
def unit():
    """hbar = m = D = 1 with a coarse chain step."""
    return validate_params(PhysicalParams(mass=1.0, coupling_D=1.0, bandwidth_B=1.0, hbar=1.0, tau=0.01))


def mc_sigma_var(var, n):
    return var * np.sqrt(2.0 / (n - 1))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
