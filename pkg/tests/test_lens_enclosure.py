"""
透镜、包围球与支撑球链条测试
"""

import numpy as np
import pytest

from conftest import ALL_KINDS
from geometry_errors import DegenerateLens, DomainError, TrivialBody
from lens_enclosure import (
    LensSpec, beta_profile_check, circumradius_bruteforce, enclosing_ball, lens_from_supports,
    make_lens, make_lens_body, random_lens_point, run_enclosure_chain, sample_lens_boundary,
)
from radial_body import make_ellipsoid
from sphere_grid import circle_grid
from spaceform_geometry import Point, SpaceformKind, model_distance, radius_of_lambda


LAMBDAS = {SpaceformKind.EUCLIDEAN: 1.0, SpaceformKind.SPHERICAL: 1.0, SpaceformKind.HYPERBOLIC: 2.0}


def test_euclidean_lens_anchor():
    lens = make_lens(SpaceformKind.EUCLIDEAN, 1.0, 1.0, 1)
    result = enclosing_ball(lens)
    assert abs(result.rho - np.sqrt(3) / 2) < 1e-12
    assert abs(result.margin - (1 - np.sqrt(3) / 2)) < 1e-12
    assert abs(circumradius_bruteforce(lens) - result.rho) < 1e-6


def test_euclidean_lens_in_three_dimensions():
    lens = make_lens(SpaceformKind.EUCLIDEAN, 1.0, 1.0, 2)
    result = enclosing_ball(lens, samples=4096)
    assert abs(result.rho - np.sqrt(3) / 2) < 1e-12


@pytest.mark.parametrize("kind", ALL_KINDS)
@pytest.mark.parametrize("n", [1, 2])
def test_margin_is_positive_on_random_lenses(kind, n, rng):
    for _ in range(5):
        lam = LAMBDAS[kind] * rng.uniform(1.0, 2.5)
        radius = radius_of_lambda(kind, lam).radius
        lens = make_lens(kind, lam, radius * rng.uniform(0.05, 1.95), n)
        assert enclosing_ball(lens, samples=2048).margin > 0


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_margin_grows_with_center_distance(kind):
    lam = LAMBDAS[kind]
    radius = radius_of_lambda(kind, lam).radius
    margins = [enclosing_ball(make_lens(kind, lam, f * radius, 1)).margin for f in (0.2, 0.8, 1.4, 1.9)]
    assert all(later > earlier for earlier, later in zip(margins, margins[1:]))


def test_degenerate_lenses():
    lens = make_lens(SpaceformKind.EUCLIDEAN, 1.0, 1.0, 1)
    with pytest.raises(DegenerateLens):
        LensSpec(lens.kind, lens.lambda_class, lens.p, lens.p)
    with pytest.raises(DomainError):
        make_lens(SpaceformKind.EUCLIDEAN, 1.0, 2.5, 1)
    with pytest.raises(DomainError):
        make_lens(SpaceformKind.HYPERBOLIC, 0.9, 0.5, 1)


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_boundary_samples_lie_on_the_lens_boundary(kind):
    lens = make_lens(kind, LAMBDAS[kind], 0.7, 2)
    points = sample_lens_boundary(lens, 2000)
    to_p = model_distance(kind, points, lens.p.coords[None, :])
    to_q = model_distance(kind, points, lens.q.coords[None, :])
    np.testing.assert_allclose(np.maximum(to_p, to_q), lens.radius, atol=1e-10)


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_beta_profile_on_random_points(kind, rng):
    lens = make_lens(kind, LAMBDAS[kind], 0.9, 2)
    for _ in range(10):
        report = beta_profile_check(lens, random_lens_point(lens, rng))
        assert report.passed
        assert list(report.profile.columns) == ["t", "beta"]
        if kind is SpaceformKind.SPHERICAL:
            assert report.fit_residual < 1e-10
        else:
            assert report.convex


def test_beta_profile_rejects_outside_point():
    lens = make_lens(SpaceformKind.EUCLIDEAN, 1.0, 1.0, 1)
    with pytest.raises(DomainError):
        beta_profile_check(lens, Point(SpaceformKind.EUCLIDEAN, np.array([0.0, 5.0])))


def test_lens_body_radial_function(circle):
    lens = make_lens(SpaceformKind.EUCLIDEAN, 1.0, 1.0, 1)
    body = make_lens_body(lens, circle)
    assert abs(body.rho[0] - 0.5) < 1e-12
    assert abs(body.rho[128] - np.sqrt(3) / 2) < 1e-12
    assert not np.all(body.smoothness_flags[127:130])
    assert np.all(body.smoothness_flags[:100])


def test_lens_from_supports_contains_ellipse(ellipse):
    lens = lens_from_supports(ellipse, 0.7)
    assert lens.d > 0
    assert enclosing_ball(lens).margin > 0


def test_lens_from_supports_on_ball(unit_circle):
    with pytest.raises(TrivialBody):
        lens_from_supports(unit_circle, 1.0)


def test_enclosure_chain_on_ellipse(ellipse):
    chain = run_enclosure_chain(ellipse, 0.7)
    assert chain.mode == "lens"
    assert chain.succeeded
    assert chain.strict_node == 0
    assert chain.to_dict()["enclosure"]["margin"] > 0


def test_enclosure_chain_without_supporting_radius():
    body = make_ellipsoid(SpaceformKind.HYPERBOLIC, [0.6, 0.5], circle_grid(256))
    chain = run_enclosure_chain(body, 1.0)
    assert chain.mode == "strict-only"
    assert chain.lens is None
    assert chain.succeeded
