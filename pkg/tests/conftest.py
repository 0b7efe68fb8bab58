import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from normsol import ProblemParams

settings.register_profile("normsol", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("normsol")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def sub_params():
    """N=3 mass-subcritical instance used throughout (passes the smallness test)."""
    return ProblemParams(N=3, p=2.5, alpha=3.0, beta=3.0, nu=1.0, a=1.0, b=1.0)
