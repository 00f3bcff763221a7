import numpy as np
import pytest

from valveseg.errors import GeometryError
from valveseg.volume import (Grid, LabelMask, Volume3D, index_to_world, trilinear_sample,
                             world_to_index)


def test_grid_validation():
    with pytest.raises(GeometryError):
        Grid((0, 4, 4), (1, 1, 1), np.zeros(3), np.eye(3))
    with pytest.raises(GeometryError):
        Grid((4, 4, 4), (1, -1, 1), np.zeros(3), np.eye(3))
    bad = np.eye(3)
    bad[0, 0] = 2.0
    with pytest.raises(GeometryError):
        Grid((4, 4, 4), (1, 1, 1), np.zeros(3), bad)


def test_index_to_world_identity(unit_grid):
    assert np.allclose(index_to_world(unit_grid, [2, 3, 4]), [2, 3, 4])


def test_index_to_world_spacing_origin():
    g = Grid((8, 8, 8), (0.5, 0.5, 0.5), np.array([10.0, 0.0, 0.0]), np.eye(3))
    assert np.allclose(index_to_world(g, [2, 0, 0]), [11.0, 0.0, 0.0])


def test_index_to_world_rotation():
    # 90 degrees about z maps +x index direction to +y world
    rot = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    origin = np.array([1.0, 2.0, 3.0])
    g = Grid((8, 8, 8), (1, 1, 1), origin, rot)
    # hand oracle: origin + R @ (1,0,0)
    expected = origin + rot @ np.array([1.0, 0.0, 0.0])
    assert np.allclose(index_to_world(g, [1, 0, 0]), expected)
    assert np.allclose(expected - origin, [0.0, 1.0, 0.0])


def test_world_index_round_trip(rot_z_grid):
    rng = np.random.default_rng(7)
    pts = rng.uniform(-5, 15, size=(100, 3))
    back = world_to_index(rot_z_grid, index_to_world(rot_z_grid, pts))
    assert np.max(np.abs(back - pts)) < 1e-9


def test_world_to_index_origin(rot_z_grid):
    assert np.allclose(world_to_index(rot_z_grid, rot_z_grid.origin), [0, 0, 0], atol=1e-9)


def test_trilinear_exact_at_integers(ramp_volume):
    assert trilinear_sample(ramp_volume, [3, 4, 5]) == ramp_volume.data[3, 4, 5]


def test_trilinear_edge_midpoint(unit_grid):
    data = np.zeros((16, 16, 16), np.float32)
    data[1, 0, 0] = 2.0
    vol = Volume3D(unit_grid, data)
    assert trilinear_sample(vol, [0.5, 0, 0]) == pytest.approx(1.0)


def test_trilinear_reproduces_linear_field(ramp_volume, unit_grid):
    # trilinear interpolation is exact on affine fields, up to float32 storage
    rng = np.random.default_rng(3)
    pts = rng.uniform(0, 15, size=(200, 3))
    expected = 2.0 * pts[:, 0] + 3.0 * pts[:, 1] - 1.5 * pts[:, 2] + 7.0
    got = trilinear_sample(ramp_volume, pts)
    assert np.max(np.abs(got - expected)) < 1e-4  # values up to ~70 in float32

    # at unit scale the stated 1e-6 bound holds outright
    i, j, k = np.meshgrid(*[np.arange(n, dtype=np.float64) for n in unit_grid.dims],
                          indexing="ij")
    small = Volume3D(unit_grid, (0.02 * i + 0.03 * j - 0.015 * k + 0.07).astype(np.float32))
    expected_small = 0.02 * pts[:, 0] + 0.03 * pts[:, 1] - 0.015 * pts[:, 2] + 0.07
    got_small = trilinear_sample(small, pts)
    assert np.max(np.abs(got_small - expected_small)) < 1e-6


def test_trilinear_out_of_bounds(ramp_volume):
    with pytest.raises(GeometryError):
        trilinear_sample(ramp_volume, [15.01, 0, 0])
    with pytest.raises(GeometryError):
        trilinear_sample(ramp_volume, [-0.01, 0, 0])


def test_mask_geometry_mismatch(unit_grid):
    with pytest.raises(GeometryError):
        LabelMask(unit_grid, np.zeros((4, 4, 4), bool))


def test_volume_immutable(ramp_volume):
    with pytest.raises(ValueError):
        ramp_volume.data[0, 0, 0] = 99.0
