"""Edge feature image and speed map driving contour evolution."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import GeometryError
from .volume import Grid, Volume3D

AUTO = "auto"


@dataclass(frozen=True)
class SpeedImage:
    """Edge-stopping speed map with samples in (0, 1]. Records the beta actually used."""

    grid: Grid
    data: np.ndarray = field(repr=False)
    beta: float = 1.0

    def __post_init__(self):
        data = np.ascontiguousarray(np.asarray(self.data, dtype=np.float32))
        if data.shape != self.grid.dims:
            raise GeometryError(f"data shape {data.shape} does not match dims {self.grid.dims}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)


def _gauss_kernel(sigma_vox: float) -> np.ndarray:
    # Truncated at 4 sigma, renormalized to sum 1.
    radius = max(1, int(math.floor(4.0 * sigma_vox)))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    w = np.exp(-0.5 * (x / sigma_vox) ** 2)
    return w / w.sum()


def gaussian_smooth(vol: Volume3D, sigma: float) -> Volume3D:
    """Separable Gaussian convolution with physical-width sigma (mm).

    Per-axis kernel width is sigma / spacing_axis; borders are clamp-to-edge.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    out = np.asarray(vol.data, dtype=np.float64)
    for axis in range(3):
        if vol.grid.dims[axis] == 1:
            continue
        w = _gauss_kernel(sigma / vol.grid.spacing[axis])
        out = ndimage.correlate1d(out, w, axis=axis, mode="nearest")
    return Volume3D(vol.grid, out.astype(np.float32))


def gradient_magnitude(vol: Volume3D) -> Volume3D:
    """Euclidean norm of the spatial gradient in per-mm units.

    Central differences at interior voxels, one-sided at the faces.
    """
    if any(d < 2 for d in vol.grid.dims):
        raise GeometryError(f"gradient_magnitude needs dims >= 2 per axis, got {vol.grid.dims}")
    gx, gy, gz = np.gradient(np.asarray(vol.data, dtype=np.float64), *vol.grid.spacing)
    mag = np.sqrt(gx * gx + gy * gy + gz * gz)
    return Volume3D(vol.grid, mag.astype(np.float32))


def edge_speed(gradmag: Volume3D, beta=AUTO) -> SpeedImage:
    """Map gradient magnitude to contour speed: s = 1 / (1 + (g/beta)^2).

    AUTO sets beta to the mean of g over voxels where g > 0 (1.0 if all zero).
    """
    g = np.asarray(gradmag.data, dtype=np.float64)
    if beta == AUTO:
        positive = g[g > 0]
        beta_val = float(positive.mean()) if positive.size else 1.0
    else:
        beta_val = float(beta)
        if beta_val <= 0:
            raise ValueError(f"beta must be > 0, got {beta_val}")
    s = 1.0 / (1.0 + (g / beta_val) ** 2)
    return SpeedImage(gradmag.grid, s.astype(np.float32), beta=beta_val)


def speed_gradient(speed: SpeedImage) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-axis spatial gradient of the speed map (per-mm, float32)."""
    gx, gy, gz = np.gradient(np.asarray(speed.data, dtype=np.float64), *speed.grid.spacing)
    return gx.astype(np.float32), gy.astype(np.float32), gz.astype(np.float32)
