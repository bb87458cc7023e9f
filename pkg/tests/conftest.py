import pytest
from hypothesis import HealthCheck, settings

from bohmsim.model import GridSpec, PhysParams

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def small_grid():
    # smallest box holding the unit-hbar initial state; 79 + 1 = 80 = 2^4 * 5
    return GridSpec(7.0, 79)


@pytest.fixture(scope="session")
def harmonic():
    return PhysParams(kappa=0.0, alpha=0.0, beta=0.0, hbar=1.0)
