"""Volumetric data model: regular 3D scalar grids with physical geometry.

Conventions: voxel data is indexed ``data[i, j, k]`` (x, y, z); world
coordinates are millimetres. ``world = origin + orientation @ (spacing * ijk)``.
Volumes are immutable after construction; derive new ones instead of mutating.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError

_ORTHO_TOL = 1e-6


@dataclass(frozen=True)
class Grid:
    """Geometry of a regular grid: dims, per-axis spacing (mm), origin, orientation."""

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    origin: np.ndarray
    orientation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=np.float64).reshape(3))
        object.__setattr__(self, "orientation", np.asarray(self.orientation, dtype=np.float64).reshape(3, 3))
        if any(d < 1 for d in self.dims):
            raise GeometryError(f"dims must be >= 1, got {self.dims}")
        if any(s <= 0 for s in self.spacing):
            raise GeometryError(f"spacing must be > 0, got {self.spacing}")
        r = self.orientation
        if not np.allclose(r.T @ r, np.eye(3), atol=_ORTHO_TOL):
            raise GeometryError("orientation columns must be unit-length and mutually orthogonal")
        self.origin.setflags(write=False)
        self.orientation.setflags(write=False)

    @property
    def h_min(self) -> float:
        return min(self.spacing)

    @property
    def voxel_volume(self) -> float:
        sx, sy, sz = self.spacing
        return sx * sy * sz

    def index_to_world(self, ijk):
        """Continuous index -> world mm. Accepts shape (3,) or (..., 3)."""
        ijk = np.asarray(ijk, dtype=np.float64)
        scaled = ijk * np.asarray(self.spacing)
        return scaled @ self.orientation.T + self.origin

    def world_to_index(self, p):
        """World mm -> continuous index. Inverse of index_to_world."""
        p = np.asarray(p, dtype=np.float64)
        scaled = (p - self.origin) @ self.orientation
        return scaled / np.asarray(self.spacing)

    def contains_index(self, ijk) -> bool:
        ijk = np.asarray(ijk, dtype=np.float64)
        return bool(np.all(ijk >= 0) and np.all(ijk <= np.asarray(self.dims) - 1))

    def matches(self, other: "Grid", tol: float = 1e-9) -> bool:
        return (
            self.dims == other.dims
            and np.allclose(self.spacing, other.spacing, atol=tol)
            and np.allclose(self.origin, other.origin, atol=tol)
            and np.allclose(self.orientation, other.orientation, atol=tol)
        )


def identity_grid(dims, spacing=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0)) -> Grid:
    return Grid(tuple(dims), tuple(spacing), np.asarray(origin, float), np.eye(3))


@dataclass(frozen=True)
class Volume3D:
    """Scalar image on a Grid. Native scalar is float32; data shape equals grid.dims."""

    grid: Grid
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float32)
        if data.shape != self.grid.dims:
            raise GeometryError(f"data shape {data.shape} does not match dims {self.grid.dims}")
        data = np.ascontiguousarray(data)
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def dims(self):
        return self.grid.dims

    @property
    def spacing(self):
        return self.grid.spacing


@dataclass(frozen=True)
class LabelMask:
    """Binary mask sharing the geometry of its parent volume."""

    grid: Grid
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        data = np.ascontiguousarray(np.asarray(self.data) != 0)
        if data.shape != self.grid.dims:
            raise GeometryError(f"mask shape {data.shape} does not match dims {self.grid.dims}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def dims(self):
        return self.grid.dims

    @property
    def spacing(self):
        return self.grid.spacing

    def volume_mm3(self) -> float:
        return float(np.count_nonzero(self.data)) * self.grid.voxel_volume


def _grid_of(obj) -> Grid:
    return obj if isinstance(obj, Grid) else obj.grid


def index_to_world(vol, ijk):
    """World position of a continuous index (extrapolation permitted)."""
    return _grid_of(vol).index_to_world(ijk)


def world_to_index(vol, p):
    """Continuous index of a world position; inverse of index_to_world."""
    return _grid_of(vol).world_to_index(p)


def trilinear_sample(vol: Volume3D, ijk) -> np.ndarray:
    """Trilinear interpolation at continuous indices inside [0, dim-1] per axis.

    Accepts shape (3,) or (N, 3); returns scalar or (N,) float32.
    """
    pts = np.atleast_2d(np.asarray(ijk, dtype=np.float64))
    dims = np.asarray(vol.grid.dims)
    if np.any(pts < 0) or np.any(pts > dims - 1):
        raise GeometryError("trilinear_sample: index outside [0, dim-1]")
    base = np.maximum(np.minimum(np.floor(pts).astype(np.int64), dims - 2), 0)
    frac = pts - base
    d = vol.data
    i, j, k = base[:, 0], base[:, 1], base[:, 2]
    i1 = np.minimum(i + 1, dims[0] - 1)
    j1 = np.minimum(j + 1, dims[1] - 1)
    k1 = np.minimum(k + 1, dims[2] - 1)
    fx, fy, fz = frac[:, 0], frac[:, 1], frac[:, 2]
    c00 = d[i, j, k] * (1 - fx) + d[i1, j, k] * fx
    c10 = d[i, j1, k] * (1 - fx) + d[i1, j1, k] * fx
    c01 = d[i, j, k1] * (1 - fx) + d[i1, j, k1] * fx
    c11 = d[i, j1, k1] * (1 - fx) + d[i1, j1, k1] * fx
    c0 = c00 * (1 - fy) + c10 * fy
    c1 = c01 * (1 - fy) + c11 * fy
    out = (c0 * (1 - fz) + c1 * fz).astype(np.float32)
    if np.asarray(ijk).ndim == 1:
        return out[0]
    return out
