"""
空间形式几何测试
"""

import numpy as np
import pytest
from scipy.integrate import quad

from conftest import ALL_KINDS
from geometry_errors import DomainError
from spaceform_geometry import (
    Point, SpaceformKind, TangentVector, exp_map, killing_field_sample, killing_flow,
    lambda_of_radius, log_and_distance, model_distance, origin, polar_coordinates, polar_points,
    project_to_tangent, radius_of_lambda, random_isometry, tangent_frame, warp_functions,
    warp_power_integral,
)


def _random_point(kind, n, rng, reach=0.8):
    base = origin(kind, n)
    frame = tangent_frame(base)
    direction = rng.normal(size=frame.shape[1])
    direction /= np.linalg.norm(direction)
    radius = reach * rng.random()
    return Point(kind, polar_points(kind, base.coords, frame, np.array([radius]), direction[None, :])[0])


def _random_tangent(p, rng, length):
    raw = project_to_tangent(p.kind, p.coords, rng.normal(size=p.coords.size))
    v = TangentVector(p, raw)
    return TangentVector(p, raw * (length / v.norm))


def test_radius_anchors():
    assert radius_of_lambda(SpaceformKind.EUCLIDEAN, 2.0).radius == 0.5
    assert abs(radius_of_lambda(SpaceformKind.SPHERICAL, 1.0).radius - np.pi / 4) < 1e-10
    assert abs(radius_of_lambda(SpaceformKind.HYPERBOLIC, 2.0).radius - 0.5 * np.log(3.0)) < 1e-10


def test_hyperbolic_lambda_one_is_outside_interval():
    with pytest.raises(DomainError):
        radius_of_lambda(SpaceformKind.HYPERBOLIC, 1.0)
    lam_class = radius_of_lambda(SpaceformKind.HYPERBOLIC, 1.0, strict=False)
    assert not lam_class.in_interval
    with pytest.raises(DomainError):
        lam_class.require_radius()


@pytest.mark.parametrize("lam", [-1.0, 0.0])
def test_nonpositive_lambda_rejected(lam):
    with pytest.raises(DomainError):
        radius_of_lambda(SpaceformKind.EUCLIDEAN, lam)


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_lambda_of_radius_inverts_radius_of_lambda(kind):
    for lam in (1.2, 2.0, 5.0):
        radius = radius_of_lambda(kind, lam).radius
        assert abs(lambda_of_radius(kind, radius) - lam) < 1e-12


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_warp_functions_solve_jacobi_equation(kind):
    r = np.linspace(0.2, 1.4, 13)
    h = 1e-4
    theta, theta_prime, big_theta = warp_functions(kind, r)
    plus = warp_functions(kind, r + h)
    minus = warp_functions(kind, r - h)
    second = (plus[0] - 2 * theta + minus[0]) / h ** 2
    np.testing.assert_allclose(second, -kind.sectional_curvature * theta, atol=1e-6)
    np.testing.assert_allclose((plus[0] - minus[0]) / (2 * h), theta_prime, atol=1e-7)
    np.testing.assert_allclose((plus[2] - minus[2]) / (2 * h), theta, atol=1e-7)
    assert warp_functions(kind, 0.0)[0] == 0.0


@pytest.mark.parametrize("kind", ALL_KINDS)
@pytest.mark.parametrize("n", [1, 2])
def test_warp_power_integral_matches_quadrature(kind, n):
    r = 1.1
    expected, _ = quad(lambda s: warp_functions(kind, s)[0] ** n, 0.0, r)
    assert abs(warp_power_integral(kind, r, n) - expected) < 1e-12


def test_warp_rejects_spherical_radius_beyond_pi():
    with pytest.raises(DomainError):
        warp_functions(SpaceformKind.SPHERICAL, 3.5)


def test_point_validation():
    with pytest.raises(DomainError):
        Point(SpaceformKind.SPHERICAL, np.array([1.0, 1.0, 0.0]))
    with pytest.raises(DomainError):
        Point(SpaceformKind.HYPERBOLIC, np.array([-1.0, 0.0, 0.0]))
    with pytest.raises(DomainError):
        TangentVector(origin(SpaceformKind.SPHERICAL, 1), np.array([1.0, 0.0, 0.0]))


@pytest.mark.parametrize("label,kind", [("E", SpaceformKind.EUCLIDEAN), ("sphere", SpaceformKind.SPHERICAL),
                                        ("Hyperbolic", SpaceformKind.HYPERBOLIC)])
def test_from_label(label, kind):
    assert SpaceformKind.from_label(label) is kind


@pytest.mark.parametrize("kind", ALL_KINDS)
@pytest.mark.parametrize("n", [1, 2])
def test_exp_moves_by_tangent_length_and_log_recovers_it(kind, n, rng):
    for _ in range(5):
        p = _random_point(kind, n, rng)
        v = _random_tangent(p, rng, 0.3 + rng.random())
        q = exp_map(v)
        assert abs(model_distance(kind, p.coords, q.coords) - v.norm) < 1e-10
        back, dist = log_and_distance(p, q)
        assert abs(dist - v.norm) < 1e-10
        np.testing.assert_allclose(back.vec, v.vec, atol=1e-9)


@pytest.mark.parametrize("kind", ALL_KINDS)
@pytest.mark.parametrize("n", [1, 2])
def test_polar_coordinates_invert_polar_points(kind, n, rng):
    center = _random_point(kind, n, rng)
    frame = tangent_frame(center)
    directions = rng.normal(size=(20, n + 1))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = rng.uniform(0.1, 1.2, size=20)
    points = polar_points(kind, center.coords, frame, radii, directions)
    dist, back = polar_coordinates(kind, center.coords, frame, points)
    np.testing.assert_allclose(dist, radii, atol=1e-10)
    np.testing.assert_allclose(back, directions, atol=1e-9)


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_killing_field_at_base_is_the_direction(kind, rng):
    p = _random_point(kind, 2, rng)
    d = _random_tangent(p, rng, 0.7)
    sample = killing_field_sample(kind, p, d)
    np.testing.assert_allclose(sample.vec, d.vec, atol=1e-12)


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_killing_flow_is_an_isometry(kind, rng):
    p = _random_point(kind, 2, rng)
    d = _random_tangent(p, rng, 1.0)
    points = np.array([_random_point(kind, 2, rng).coords for _ in range(6)])
    moved = killing_flow(kind, d, points, 0.4)
    before = model_distance(kind, points[:, None, :], points[None, :, :])
    after = model_distance(kind, moved[:, None, :], moved[None, :, :])
    np.testing.assert_allclose(after, before, atol=1e-10)
    assert not np.allclose(moved, points)


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_random_isometry_preserves_distance(kind, rng):
    iso = random_isometry(kind, 1, rng)
    points = np.array([_random_point(kind, 1, rng).coords for _ in range(5)])
    moved = iso.apply(points)
    for row in moved:
        Point(kind, row)
    before = model_distance(kind, points[:, None, :], points[None, :, :])
    after = model_distance(kind, moved[:, None, :], moved[None, :, :])
    np.testing.assert_allclose(after, before, atol=1e-10)
