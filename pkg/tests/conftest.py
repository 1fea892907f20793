import numpy as np
import pytest

from eulerslice.mesh import build_mesh


@pytest.fixture
def mesh1d_small():
    return build_mesh(1, 1, 4, 1.0, 1200.0)


@pytest.fixture
def mesh1d_100():
    return build_mesh(1, 1, 100, 1.0, 30000.0)


@pytest.fixture
def mesh2d_small():
    return build_mesh(2, 4, 2, 4000.0, 2000.0, periodic_x=True)


@pytest.fixture
def mesh2d_open():
    return build_mesh(2, 3, 3, 3000.0, 3000.0, periodic_x=False)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
