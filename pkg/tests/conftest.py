import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nvlab import catalog, get_problem

settings.register_profile(
    "lab",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("lab")


@pytest.fixture(scope="session")
def problems():
    return {p.name: p for p in catalog()}


@pytest.fixture(scope="session")
def heisenberg():
    return get_problem("heisenberg")


@pytest.fixture(scope="session")
def gbm():
    return get_problem("gbm1d")


@pytest.fixture(scope="session")
def diag_comm():
    return get_problem("diag-comm")


@pytest.fixture(scope="session")
def linear_nc():
    return get_problem("linear-nc")


def sample_states(problem, count=100, seed=1234, spread=1.0):
    """Fixed random states around the starting point, for algebra oracles."""
    rng = np.random.default_rng(seed)
    return problem.x0[None, :] + spread * rng.standard_normal((count, problem.n))
