import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from kinetic_mfg.phase_grid import build_grid

settings.register_profile(
    "default", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def small_grid():
    return build_grid(32, 64, 2 * np.pi, 8.0)


@pytest.fixture(scope="session")
def desk_grid():
    return build_grid(128, 128, 2 * np.pi, 8.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
