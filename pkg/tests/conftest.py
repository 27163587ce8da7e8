"""
共用的测试夹具
"""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from radial_body import make_ball, make_ellipsoid  # noqa: E402
from sphere_grid import circle_grid, icosphere_grid  # noqa: E402
from spaceform_geometry import SpaceformKind  # noqa: E402

ALL_KINDS = [SpaceformKind.EUCLIDEAN, SpaceformKind.SPHERICAL, SpaceformKind.HYPERBOLIC]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def circle():
    return circle_grid(512)


@pytest.fixture
def small_circle():
    return circle_grid(128)


@pytest.fixture
def icosphere():
    return icosphere_grid(3)


@pytest.fixture
def ellipse(circle):
    return make_ellipsoid(SpaceformKind.EUCLIDEAN, [1.0, 0.8], circle)


@pytest.fixture
def unit_circle(circle):
    return make_ball(SpaceformKind.EUCLIDEAN, 1.0, circle)
