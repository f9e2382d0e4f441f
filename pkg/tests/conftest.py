import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cftlab.fock import FockBasis
from cftlab.params import ModelParams, Truncation

settings.register_profile(
    "default", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def params():
    return ModelParams()


@pytest.fixture
def fock_params():
    """``ell = 1``, ``delta = 0.5``: anyon mode weights decay like ``e^{-pi eps n}``."""
    return ModelParams(ell=1.0, delta=0.5)


@pytest.fixture(scope="session")
def small_basis():
    return FockBasis(Truncation(4, 6, 1))


@pytest.fixture(scope="session")
def mid_basis():
    return FockBasis(Truncation(12, 12, 2))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def q_params(q, **kw):
    """Parameters with the nome ``q`` at the default ``ell = pi`` (``kappa = 1/2``)."""
    p = ModelParams(**kw)
    delta = math.inf if q == 0 else -math.log(q) / (2 * p.kappa)
    return p.with_(delta=delta)


# one summary line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
