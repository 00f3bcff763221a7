import numpy as np
import pytest

from valveseg.volume import Grid, Volume3D


@pytest.fixture
def unit_grid():
    return Grid((16, 16, 16), (1.0, 1.0, 1.0), np.zeros(3), np.eye(3))


@pytest.fixture
def rot_z_grid():
    # 90 degree rotation about z, anisotropic spacing, shifted origin
    rot = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    return Grid((12, 10, 8), (0.5, 0.7, 1.1), np.array([10.0, -4.0, 2.5]), rot)


@pytest.fixture
def ramp_volume(unit_grid):
    i, j, k = np.meshgrid(*[np.arange(n, dtype=np.float32) for n in unit_grid.dims], indexing="ij")
    return Volume3D(unit_grid, 2.0 * i + 3.0 * j - 1.5 * k + 7.0)


def sphere_sdf_state(n=64, spacing=1.0, radius=10.0, center=None):
    """Exact sphere signed-distance LevelSetState on an isotropic grid."""
    from valveseg.levelset import LevelSetState, default_band_width

    grid = Grid((n, n, n), (spacing,) * 3, np.zeros(3), np.eye(3))
    if center is None:
        center = (np.asarray(grid.dims) - 1.0) / 2.0 * spacing
    axes = [np.arange(m, dtype=np.float64) * s for m, s in zip(grid.dims, grid.spacing)]
    x, y, z = np.meshgrid(*axes, indexing="ij")
    phi = np.sqrt((x - center[0]) ** 2 + (y - center[1]) ** 2 + (z - center[2]) ** 2) - radius
    return LevelSetState(grid, phi.astype(np.float32), band_width=default_band_width(grid))


def uniform_speed(grid, value=1.0):
    from valveseg.filters import SpeedImage

    return SpeedImage(grid, np.full(grid.dims, value, dtype=np.float32), beta=1.0)
