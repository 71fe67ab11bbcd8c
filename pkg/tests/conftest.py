import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dirac_solitary.grid import GridSpec

settings.register_profile(
    "numeric", max_examples=15, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("numeric")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_grid():
    return GridSpec(16, 20.0)


@pytest.fixture(scope="session")
def unit_momentum_grid():
    # l = 2 pi puts integer momenta on the lattice, so p = (1, 1, 1) is a node
    return GridSpec(8, 2 * np.pi)
