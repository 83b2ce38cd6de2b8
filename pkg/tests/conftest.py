import os

import hypothesis
import numpy as np
import pytest

from nvdqd.model import ModelParams
from nvdqd.transport import default_initial_state, model_liouvillian, propagate, time_grid

hypothesis.settings.register_profile("default", max_examples=30, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.register_profile("thorough", max_examples=200, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def random_unitary(n, rng):
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_density(n, rng, rank=None):
    rank = rank or n
    a = rng.normal(size=(n, rank)) + 1j * rng.normal(size=(n, rank))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


@pytest.fixture(scope="session")
def fig2_params():
    return ModelParams()


@pytest.fixture(scope="session")
def fig2_liouvillian(fig2_params):
    return model_liouvillian(fig2_params)


@pytest.fixture(scope="session")
def fig2_trajectory(fig2_liouvillian):
    """Mixed-state run over 150 us with 0.5 us output spacing."""
    return propagate(fig2_liouvillian, default_initial_state(), time_grid(150.0, 0.5))


# -- acceptance report -----------------------------------------------------------------

ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
