import numpy as np
import pytest

from fkhom import build_field, identity_field, solve_correctors, homogenize
from fkhom.masks import Ellipsoid, GridWindow, rasterize_ellipsoid


@pytest.fixture(scope="session")
def ident():
    return identity_field()


@pytest.fixture(scope="session")
def trig_field():
    return build_field("trig", {"c": 2.0, "A": 1.0}, cells_per_period=64)


@pytest.fixture(scope="session")
def trig_correctors(trig_field):
    return solve_correctors(trig_field, n=64)


@pytest.fixture(scope="session")
def trig_abar(trig_field, trig_correctors):
    return homogenize(trig_field, trig_correctors)


@pytest.fixture(scope="session")
def unit_disk_h32():
    w = GridWindow.covering(-1.2, 1.2, -1.2, 1.2, 1.0 / 32)
    return rasterize_ellipsoid(Ellipsoid.from_tensor(np.eye(2), 1.0), w)


@pytest.fixture(scope="session")
def unit_disk_h64():
    w = GridWindow.covering(-1.1, 1.1, -1.1, 1.1, 1.0 / 64)
    return rasterize_ellipsoid(Ellipsoid.from_tensor(np.eye(2), 1.0), w)
