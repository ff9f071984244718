import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from rydcav.hilbert import HilbertSpace
from rydcav.model import SystemParams

settings.register_profile(
    "default", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def fig2_params():
    return SystemParams(g=1.0, omega_l=1.0, delta=10.0, J=10.0, v_dd=20.0)


@pytest.fixture
def fig5_params():
    return SystemParams(g=1.0, omega_l=1.0, delta=10.0, J=0.998, v_dd=2.0)


@pytest.fixture
def space4():
    return HilbertSpace(4)


@pytest.fixture
def quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield


def random_state(space, rng):
    psi = rng.normal(size=space.dim) + 1j * rng.normal(size=space.dim)
    return psi / np.linalg.norm(psi)


# Filled by the acceptance tests and echoed after the run.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
