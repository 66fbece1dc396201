import pytest

from loglip.grids import GridSpec


@pytest.fixture(scope="session")
def grid():
    """Default 1D grid: 2048 points on a 2*pi torus."""
    return GridSpec()


@pytest.fixture(scope="session")
def small_grid():
    return GridSpec(points=256)


@pytest.fixture(scope="session")
def grid2d():
    return GridSpec(dim=2, points=64)
