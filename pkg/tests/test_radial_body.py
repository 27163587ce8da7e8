"""
径向凸体测试: 构造、测量、闭式参考值、包含判定与序列化
"""

import numpy as np
import pytest
from scipy.special import ellipe

from conftest import ALL_KINDS
from geometry_errors import ConfigError, DomainError
from radial_body import (
    RadialBody, contains, contains_points, load_body, make_ball, make_ellipsoid, make_perturbed_ball,
    measure, measure_volume, polygon_perimeter, reference_closed_forms, save_body,
)
from sphere_grid import circle_grid, icosphere_grid
from spaceform_geometry import Point, SpaceformKind, origin, random_isometry


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_ball_measure_matches_closed_form_on_circle(kind, circle):
    body = make_ball(kind, 0.9, circle)
    ref = reference_closed_forms("ball", {"kind": kind, "n": 1, "R": 0.9})
    area, volume = measure(body)
    assert abs(area / ref.area - 1) < 1e-8
    assert abs(volume / ref.volume - 1) < 1e-8


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_ball_measure_matches_closed_form_on_icosphere(kind, icosphere):
    body = make_ball(kind, 0.7, icosphere)
    ref = reference_closed_forms("ball", {"kind": kind, "n": 2, "R": 0.7})
    area, volume = measure(body)
    assert abs(area / ref.area - 1) < 1e-9
    assert abs(volume / ref.volume - 1) < 1e-9


def test_euclidean_ellipse_area_and_perimeter(ellipse):
    area, volume = measure(ellipse)
    assert abs(volume - np.pi * 0.8) < 1e-10
    assert abs(area - 4.0 * ellipe(0.36)) < 1e-8


def test_perturbed_circle_volume_anchor(circle):
    body = make_perturbed_ball(SpaceformKind.EUCLIDEAN, 1.0, circle, 0.1, 2)
    assert abs(measure_volume(body) - (np.pi + 0.5 * np.pi * 0.01)) < 1e-12


def test_perturbed_sphere_volume_anchor(icosphere):
    a = 0.1
    body = make_perturbed_ball(SpaceformKind.EUCLIDEAN, 1.0, icosphere, a, 2)
    expected = 4 * np.pi / 3 + 4 * np.pi * a ** 2 / 5 + 8 * np.pi * a ** 3 / 105
    assert abs(measure_volume(body) / expected - 1) < 1e-4


def test_polygon_perimeter_converges_to_circle():
    coarse = polygon_perimeter(make_ball(SpaceformKind.EUCLIDEAN, 1.0, circle_grid(64)))
    fine = polygon_perimeter(make_ball(SpaceformKind.EUCLIDEAN, 1.0, circle_grid(128)))
    err_coarse, err_fine = 2 * np.pi - coarse, 2 * np.pi - fine
    assert err_fine > 0
    assert 3.9 < err_coarse / err_fine < 4.1


def test_closed_form_lenses():
    lens2d = reference_closed_forms("lens2d", {"lam": 1.0, "d": 1.0})
    assert abs(lens2d.area - 4 * np.pi / 3) < 1e-12
    assert abs(lens2d.volume - (2 * np.pi / 3 - np.sqrt(3) / 2)) < 1e-12
    lens3d = reference_closed_forms("lens3d", {"lam": 1.0, "d": 1.0})
    assert abs(lens3d.area - 2 * np.pi) < 1e-12
    assert abs(lens3d.volume - 5 * np.pi / 12) < 1e-12
    sausage = reference_closed_forms("sausage", {"lam": 1.0, "L": 0.0})
    assert abs(sausage.volume - 4 * np.pi / 3) < 1e-12
    with pytest.raises(DomainError):
        reference_closed_forms("lens2d", {"lam": 1.0, "d": 2.5})
    with pytest.raises(DomainError):
        reference_closed_forms("torus", {})


def test_body_validation(circle):
    center = origin(SpaceformKind.EUCLIDEAN, 1)
    with pytest.raises(DomainError):
        RadialBody(SpaceformKind.EUCLIDEAN, center, circle, -np.ones(len(circle)))
    with pytest.raises(DomainError):
        RadialBody(SpaceformKind.EUCLIDEAN, center, circle, np.ones(3))
    with pytest.raises(DomainError):
        make_ball(SpaceformKind.SPHERICAL, 1.6, circle)
    with pytest.raises(DomainError):
        make_ellipsoid(SpaceformKind.EUCLIDEAN, [1.0, 0.8, 0.5], circle)


def test_rho_is_read_only(ellipse):
    with pytest.raises(ValueError):
        ellipse.rho[0] = 2.0


def test_containment(ellipse):
    assert contains(ellipse, origin(SpaceformKind.EUCLIDEAN, 1))
    assert contains(ellipse, Point(SpaceformKind.EUCLIDEAN, np.array([0.95, 0.0])))
    assert not contains(ellipse, Point(SpaceformKind.EUCLIDEAN, np.array([0.0, 0.85])))
    inside = contains_points(ellipse, ellipse.boundary_points[:10], slack=1e-9)
    assert inside.all()


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_measure_is_isometry_invariant(kind, rng):
    body = make_ellipsoid(kind, [0.6, 0.5], circle_grid(256))
    moved = body.transformed(random_isometry(kind, 1, rng))
    np.testing.assert_allclose(measure(moved), measure(body), rtol=1e-10)


def test_measure_is_relabelling_invariant(rng):
    body = make_perturbed_ball(SpaceformKind.HYPERBOLIC, 0.8, icosphere_grid(2), 0.05, 3)
    perm = rng.permutation(len(body.grid))
    np.testing.assert_allclose(measure(body.permuted(perm)), measure(body), rtol=1e-12)


def test_save_and_load_is_bit_exact(tmp_path, rng):
    body = make_perturbed_ball(SpaceformKind.SPHERICAL, 0.6, circle_grid(64), 0.05, 3)
    body = body.permuted(rng.permutation(64))
    path = tmp_path / "body.json"
    save_body(body, path)
    loaded = load_body(path)
    assert loaded.kind is body.kind
    np.testing.assert_array_equal(loaded.rho, body.rho)
    np.testing.assert_array_equal(loaded.grid.nodes, body.grid.nodes)
    np.testing.assert_array_equal(loaded.center.coords, body.center.coords)
    np.testing.assert_array_equal(loaded.smoothness_flags, body.smoothness_flags)


def test_load_body_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_body(tmp_path / "missing.json")
    broken = tmp_path / "broken.json"
    broken.write_text('{"kind": "E"}', encoding="utf-8")
    with pytest.raises(ConfigError):
        load_body(broken)
