"""
变分公式与稳定性判据测试
"""

import numpy as np
import pytest

from geometry_errors import DomainError
from radial_body import make_ball
from sphere_grid import icosphere_grid
from spaceform_geometry import Point, SpaceformKind, TangentVector
from variation_formulas import (
    VariationField, first_variations, interior_of, killing_normal_component, killing_stability_test,
    patch_killing_direction,
    second_variations, stability_operator_apply, stability_quadratic_form, stability_spectrum,
    supersolution_stability_test,
)


def test_first_variations_of_shrinking_ball(circle):
    radius = 0.5
    body = make_ball(SpaceformKind.EUCLIDEAN, radius, circle)
    d_vol, d_area = first_variations(body, VariationField.from_values(np.ones(len(circle))))
    assert abs(d_vol + 2 * np.pi * radius) < 1e-10
    assert abs(d_area + 2 * np.pi) < 1e-10


def test_second_variations_of_shrinking_circle(unit_circle):
    d2_vol, d2_area = second_variations(unit_circle, VariationField.from_values(np.ones(len(unit_circle.grid))))
    assert abs(d2_vol - 2 * np.pi) < 1e-10
    assert abs(d2_area) < 1e-10


def test_acceleration_enters_second_variations(unit_circle):
    count = len(unit_circle.grid)
    base = second_variations(unit_circle, VariationField.from_values(np.ones(count)))
    pushed = second_variations(unit_circle, VariationField.from_values(np.ones(count), np.ones(count)))
    assert abs((pushed[0] - base[0]) + 2 * np.pi) < 1e-10
    assert abs((pushed[1] - base[1]) + 2 * np.pi) < 1e-10


def test_quadratic_form_on_unit_circle(unit_circle):
    theta = unit_circle.grid.angles
    everywhere = np.ones(theta.size, dtype=bool)
    assert abs(stability_quadratic_form(unit_circle, everywhere, np.cos(theta))) < 1e-9
    assert abs(stability_quadratic_form(unit_circle, everywhere, np.cos(2 * theta)) - 3 * np.pi) < 1e-9


def test_stability_operator_on_unit_circle(unit_circle):
    theta = unit_circle.grid.angles
    np.testing.assert_allclose(stability_operator_apply(unit_circle, np.cos(2 * theta)),
                               -3 * np.cos(2 * theta), atol=1e-8)


def test_spectrum_of_full_circle(unit_circle):
    everywhere = np.ones(len(unit_circle.grid), dtype=bool)
    values = stability_spectrum(unit_circle, everywhere, k=3)
    np.testing.assert_allclose(values, [-1.0, 0.0, 0.0], atol=1e-8)


def test_supersolution_certificate_on_circle_patch(unit_circle):
    theta = unit_circle.grid.angles
    wrapped = np.angle(np.exp(1j * theta))
    omega = np.abs(wrapped) < 1.2
    cert = supersolution_stability_test(unit_circle, omega, np.cos(theta), samples=40,
                                        rng=np.random.default_rng(3))
    assert cert.certified
    assert cert.cross_validated
    assert cert.min_form > 0


def test_killing_certificate_on_ellipse_patch(ellipse):
    theta = ellipse.grid.angles
    omega = np.abs(np.angle(np.exp(1j * theta))) < 0.6
    direction = patch_killing_direction(ellipse, omega)
    np.testing.assert_allclose(direction.base.coords, [1.0, 0.0], atol=1e-12)
    assert killing_stability_test(ellipse, omega, direction)
    assert not killing_stability_test(ellipse, np.ones(theta.size, dtype=bool), direction)


def test_rejects_functions_outside_support(unit_circle):
    omega = np.zeros(len(unit_circle.grid), dtype=bool)
    omega[:10] = True
    with pytest.raises(DomainError):
        stability_quadratic_form(unit_circle, omega, np.ones(omega.size))


def test_variation_field_validation():
    support = np.array([True, False, True])
    with pytest.raises(DomainError):
        VariationField(support, np.array([1.0, 2.0, 0.0]))
    with pytest.raises(DomainError):
        VariationField(support, np.ones(2))
    field = VariationField.from_values(np.array([0.0, 1.0, 0.0]), np.array([2.0, 0.0, 0.0]))
    np.testing.assert_array_equal(field.support, [True, True, False])


@pytest.mark.slow
def test_quadratic_form_on_unit_sphere():
    body = make_ball(SpaceformKind.EUCLIDEAN, 1.0, icosphere_grid(4))
    everywhere = np.ones(len(body.grid), dtype=bool)
    z = body.grid.nodes[:, 2]
    # 一次谐波: ∫|∇z|² - 2∫z² = 0
    assert abs(stability_quadratic_form(body, everywhere, z)) < 1e-2 * (8 * np.pi / 3)
    # 二次谐波: (6 - 2)∫f² = 64π/45
    expected = 64 * np.pi / 45
    form = stability_quadratic_form(body, everywhere, z ** 2 - 1.0 / 3.0)
    assert abs(form / expected - 1) < 2e-2


@pytest.mark.slow
def test_supersolution_certificate_on_sphere_cap():
    body = make_ball(SpaceformKind.EUCLIDEAN, 1.0, icosphere_grid(4))
    omega = body.grid.nodes[:, 2] > 0.3
    direction = TangentVector(Point(SpaceformKind.EUCLIDEAN, np.array([0.0, 0.0, 1.0])),
                              np.array([0.0, 0.0, -1.0]))
    u = killing_normal_component(body, direction)
    assert np.all(u[omega] > 0)
    # ⟨ν, X⟩ 是 Jacobi 场: Δu + |A|²u = 0
    assert np.max(np.abs(stability_operator_apply(body, u)[interior_of(body, omega)])) < 1e-2
    cert = supersolution_stability_test(body, omega, u, samples=40, rng=np.random.default_rng(5))
    assert cert.certified
    assert cert.cross_validated
