"""
球面网格测试
"""

import numpy as np
import pytest

from geometry_errors import DomainError
from sphere_grid import SphereGrid, circle_grid, icosphere_grid, make_grid


def test_circle_grid_quadrature():
    grid = circle_grid(64)
    assert len(grid) == 64
    assert abs(grid.weights.sum() - 2 * np.pi) < 1e-12
    assert abs(grid.spacing - 2 * np.pi / 64) < 1e-15
    assert np.all(np.asarray(grid.adjacency.sum(axis=1)).ravel() == 2)


@pytest.mark.parametrize("level", [0, 1, 2, 3])
def test_icosphere_counts_and_weights(level):
    grid = icosphere_grid(level)
    assert len(grid) == 10 * 4 ** level + 2
    assert abs(grid.weights.sum() - 4 * np.pi) < 1e-10
    np.testing.assert_allclose(np.linalg.norm(grid.nodes, axis=1), 1.0, atol=1e-14)
    degrees = np.asarray(grid.adjacency.sum(axis=1)).ravel()
    assert set(degrees.tolist()) <= {5, 6}
    assert int(np.sum(degrees == 5)) == 12


def test_icosphere_faces_point_outward(icosphere):
    a, b, c = (icosphere.nodes[icosphere.faces[:, k]] for k in range(3))
    normals = np.cross(b - a, c - a)
    assert np.all(np.sum(normals * (a + b + c), axis=1) > 0)


def test_icosphere_quadrature_integrates_low_harmonics(icosphere):
    z = icosphere.nodes[:, 2]
    assert abs(np.sum(icosphere.weights * z)) < 1e-12
    assert abs(np.sum(icosphere.weights * z ** 2) - 4 * np.pi / 3) < 1e-10


def test_circle_interpolation_is_accurate():
    grid = circle_grid(256)
    values = np.cos(grid.angles) + 0.3 * np.sin(3 * grid.angles)
    query = np.linspace(0.01, 2 * np.pi, 37)
    directions = np.column_stack([np.cos(query), np.sin(query)])
    expected = np.cos(query) + 0.3 * np.sin(3 * query)
    np.testing.assert_allclose(grid.interpolate(values, directions), expected, atol=1e-6)


def test_icosphere_interpolation_reproduces_nodes_and_smooth_data(icosphere, rng):
    values = icosphere.nodes[:, 2] + 0.5 * icosphere.nodes[:, 0]
    np.testing.assert_allclose(icosphere.interpolate(values, icosphere.nodes[:20]), values[:20], atol=1e-10)
    query = rng.normal(size=(50, 3))
    query /= np.linalg.norm(query, axis=1, keepdims=True)
    expected = query[:, 2] + 0.5 * query[:, 0]
    np.testing.assert_allclose(icosphere.interpolate(values, query), expected, atol=2e-2)


def test_permuted_grid_round_trips_through_descriptor(rng):
    grid = circle_grid(32)
    perm = rng.permutation(len(grid))
    shuffled = grid.permuted(perm)
    np.testing.assert_array_equal(shuffled.nodes, grid.nodes[perm])
    rebuilt = SphereGrid.from_descriptor(shuffled.describe())
    np.testing.assert_array_equal(rebuilt.nodes, shuffled.nodes)
    np.testing.assert_array_equal(rebuilt.weights, shuffled.weights)


def test_permuted_icosphere_keeps_faces_consistent(rng):
    grid = icosphere_grid(1)
    perm = rng.permutation(len(grid))
    shuffled = grid.permuted(perm)
    original_faces = {tuple(sorted(f)) for f in grid.faces.tolist()}
    relabelled = {tuple(sorted(perm[f].tolist())) for f in shuffled.faces}
    assert relabelled == original_faces


def test_invalid_inputs():
    with pytest.raises(DomainError):
        circle_grid(4)
    with pytest.raises(DomainError):
        make_grid(3)
    with pytest.raises(DomainError):
        circle_grid(16).permuted(np.zeros(16, dtype=int))
