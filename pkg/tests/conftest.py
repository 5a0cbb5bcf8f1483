import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from crgeom.manifold import HopfGrid, lens, sphere

settings.register_profile("desk", max_examples=15, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("desk")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def poly_sphere():
    return sphere()


@pytest.fixture(scope="session")
def grid_sphere():
    return sphere(HopfGrid(16, 32, 32))


@pytest.fixture(scope="session")
def small_grid():
    return sphere(HopfGrid(8, 16, 16))


@pytest.fixture(scope="session")
def lens31():
    return lens(3, 1)
