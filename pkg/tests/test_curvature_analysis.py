"""
曲率与 λ-凸性测试
"""

import numpy as np
import pandas as pd
import pytest

from conftest import ALL_KINDS
from curvature_analysis import (
    global_blaschke_check, lambda_convexity_check, shape_operator, strict_point, supporting_ball_test,
)
from geometry_errors import DomainError, NoStrictPoint
from radial_body import make_ball
from spaceform_geometry import SpaceformKind, warp_functions


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_ball_curvature_on_circle(kind, small_circle):
    radius = 0.6
    report = shape_operator(make_ball(kind, radius, small_circle))
    theta, theta_prime, _ = warp_functions(kind, radius)
    np.testing.assert_allclose(report.kappa[:, 0], theta_prime / theta, atol=1e-10)


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_ball_curvature_on_icosphere(kind, icosphere):
    radius = 0.5
    report = shape_operator(make_ball(kind, radius, icosphere))
    expected = {SpaceformKind.EUCLIDEAN: 1 / radius, SpaceformKind.SPHERICAL: 1 / np.tan(radius),
                SpaceformKind.HYPERBOLIC: 1 / np.tanh(radius)}[kind]
    np.testing.assert_allclose(report.kappa, expected, atol=1e-9)
    np.testing.assert_allclose(report.mean, 2 * expected, atol=1e-9)


def test_euclidean_ball_normals_point_inward(unit_circle):
    report = shape_operator(unit_circle)
    np.testing.assert_allclose(report.normals, -report.boundary_points, atol=1e-12)


def test_ellipse_curvature_at_vertices(ellipse):
    kappa = shape_operator(ellipse).kappa_min
    assert abs(kappa[0] - 1 / 0.64) < 1e-8
    assert abs(kappa[128] - 0.8) < 1e-8


def test_lambda_check_finds_violation_on_short_axis(ellipse):
    check = lambda_convexity_check(ellipse, 1.0)
    assert not check.is_lambda_convex
    assert check.violation_node in {128, 384}
    assert abs(check.min_kappa - 0.8) < 1e-8
    assert lambda_convexity_check(ellipse, 0.8).is_lambda_convex


def test_strict_point_on_ellipse_and_ball(ellipse, unit_circle):
    assert strict_point(ellipse, 0.8) == 0
    with pytest.raises(NoStrictPoint):
        strict_point(unit_circle, 1.0)


def test_global_blaschke_check(ellipse):
    assert global_blaschke_check(ellipse, 0.7)
    with pytest.raises(DomainError):
        global_blaschke_check(ellipse, 1.0)


def test_supporting_ball_test(ellipse):
    assert supporting_ball_test(ellipse, 0, 0.8)
    assert not supporting_ball_test(ellipse, 128, 1.5)


def test_supporting_ball_at_unit_lambda(ellipse, unit_circle):
    # 长轴端点 κ₁ = 1.5625, 短轴端点 κ₁ = 0.8
    assert supporting_ball_test(ellipse, 0, 1.0)
    assert not supporting_ball_test(ellipse, 128, 1.0)
    assert all(supporting_ball_test(unit_circle, node, 0.8) for node in (0, 100, 256))


def test_curvature_table(ellipse, tmp_path):
    path = tmp_path / "curvature.csv"
    shape_operator(ellipse).to_csv(path)
    frame = pd.read_csv(path)
    assert list(frame.columns) == ["node", "k1", "H"]
    assert len(frame) == len(ellipse.grid)
