"""Narrow-band signed-distance level-set evolution (geodesic active contours).

The evolution integrates, with explicit upwind differencing,

    dphi/dt = -(a_p * s) |grad phi|_godunov
              + a_c * s * kappa |grad phi|_central
              + a_a * (grad s . grad phi)_upwind

with phi < 0 inside, so positive propagation grows the region and negative
propagation shrinks it. States are immutable snapshots; advance returns a new
state and is bit-deterministic for any thread count (Jacobi updates only).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree
from skimage import measure

from . import _kernels
from .annulus import AnnulusModel, signed_height
from .errors import ContourCollapsedError, GeometryError, ValveSegError
from .filters import SpeedImage, speed_gradient
from .volume import Grid, LabelMask

BLOODPOOL = "BLOODPOOL"
LEAFLET = "LEAFLET"

_NO_ROI = np.ones(1, dtype=np.uint8)


@dataclass(frozen=True)
class ContourParams:
    """Scaling of the three flow terms plus time-step and reinit policy."""

    curvature_scale: float
    advection_scale: float
    propagation_scale: float
    dt_safety: float = 0.4
    reinit_interval: int = 20

    def __post_init__(self):
        if not (0.0 < self.dt_safety < 1.0):
            raise ValueError(f"dt_safety must be in (0,1), got {self.dt_safety}")
        if self.reinit_interval < 1:
            raise ValueError(f"reinit_interval must be >= 1, got {self.reinit_interval}")


def default_params(stage: str) -> ContourParams:
    """Stage presets: growing blood-pool regime and shrinking leaflet regime."""
    if stage == BLOODPOOL:
        return ContourParams(curvature_scale=1.2, advection_scale=1.0, propagation_scale=0.9)
    if stage == LEAFLET:
        return ContourParams(curvature_scale=0.9, advection_scale=0.1, propagation_scale=-0.4)
    raise ValueError(f"unknown stage {stage!r}; expected {BLOODPOOL} or {LEAFLET}")


def default_band_width(grid: Grid, params: ContourParams | None = None) -> float:
    """Band half-width: 3x the worst-case front travel between reinitializations."""
    p = params or ContourParams(0.0, 0.0, 0.0)
    return 3.0 * p.reinit_interval * p.dt_safety * grid.h_min


@dataclass(frozen=True)
class LevelSetState:
    """Signed-distance field snapshot (negative inside) on a full grid."""

    grid: Grid
    phi: np.ndarray = field(repr=False)
    band_width: float
    iterations_done: int = 0
    dt: float | None = None  # persisted so split advances replay bit-exactly

    def __post_init__(self):
        phi = np.ascontiguousarray(np.asarray(self.phi, dtype=np.float32))
        if phi.shape != self.grid.dims:
            raise GeometryError(f"phi shape {phi.shape} does not match dims {self.grid.dims}")
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)

    def inside_count(self) -> int:
        return int(np.count_nonzero(self.phi < 0))

    def inside_volume_mm3(self) -> float:
        return self.inside_count() * self.grid.voxel_volume


def to_mask(state: LevelSetState) -> LabelMask:
    """Inside region {phi < 0} as a binary mask."""
    return LabelMask(state.grid, state.phi < 0)


def init_ball(grid: Grid, center, radius: float, band_width: float | None = None) -> LevelSetState:
    """Exact sphere signed-distance field: phi(x) = |x - center| - radius."""
    center = np.asarray(center, dtype=np.float64).reshape(3)
    if radius <= max(grid.spacing):
        raise ValueError(f"radius must exceed the largest voxel spacing, got {radius}")
    if not grid.contains_index(grid.world_to_index(center)):
        raise GeometryError(f"ball center {center.tolist()} lies outside the volume")
    coords = _scaled_coords(grid)
    c_scaled = grid.world_to_index(center) * np.asarray(grid.spacing)
    phi = np.linalg.norm(coords - c_scaled, axis=-1) - radius
    return LevelSetState(grid, phi.astype(np.float32), band_width or default_band_width(grid))


def init_shell(bp: LabelMask, distance: float, annulus: AnnulusModel | None = None,
               roi: np.ndarray | None = None, band_width: float | None = None) -> LevelSetState:
    """Outward shell seed for the leaflet stage.

    Inside region: voxels not in bp whose Euclidean distance to the bp voxel
    set is <= distance (mm). phi is the signed distance to that region's
    boundary from exact distance transforms. ``roi`` optionally restricts the
    shell (see roi_cylinder_mask); ``annulus`` is accepted for that purpose.
    """
    inside_bp = bp.data
    n_in = int(np.count_nonzero(inside_bp))
    if n_in == 0:
        raise ValveSegError("init_shell: blood-pool mask is empty")
    if n_in == inside_bp.size:
        raise ValveSegError("init_shell: blood-pool mask fills the whole volume (no exterior)")
    if distance <= 0:
        raise ValueError(f"shell distance must be > 0, got {distance}")
    d_out = ndimage.distance_transform_edt(~inside_bp, sampling=bp.grid.spacing)
    shell = (~inside_bp) & (d_out <= distance)
    if roi is not None:
        shell &= roi.astype(bool)
    if not shell.any():
        raise ValveSegError("init_shell: empty shell")
    d_in = ndimage.distance_transform_edt(shell, sampling=bp.grid.spacing)
    d_ex = ndimage.distance_transform_edt(~shell, sampling=bp.grid.spacing)
    phi = np.where(shell, -d_in, d_ex).astype(np.float32)
    return LevelSetState(bp.grid, phi, band_width or default_band_width(bp.grid))


def roi_cylinder_mask(grid: Grid, annulus: AnnulusModel, radius_margin: float = 2.0,
                      above: float = 1.5, below: float | None = None) -> np.ndarray:
    """Cylindrical region of interest around the annulus (axis = plane normal).

    ``above``/``below`` are extents along +/- plane normal in mm; ``below``
    defaults to the annulus max radius (generous room for the leaflet body).
    """
    if below is None:
        below = annulus.max_radius
    coords = _world_coords(grid)
    h = signed_height(coords.reshape(-1, 3), annulus).reshape(grid.dims)
    rel = coords - annulus.centroid
    axial = h[..., None] * annulus.plane_normal
    radial = np.linalg.norm(rel - axial, axis=-1)
    r_max = annulus.max_radius + radius_margin
    return ((h <= above) & (h >= -below) & (radial <= r_max)).astype(np.uint8)


_COORD_CACHE: dict[tuple, np.ndarray] = {}


def _scaled_coords(grid: Grid) -> np.ndarray:
    """Voxel positions in spacing-scaled index space (distance-true, orientation-free)."""
    key = (grid.dims, grid.spacing)
    got = _COORD_CACHE.get(key)
    if got is None:
        axes = [np.arange(n, dtype=np.float64) * s for n, s in zip(grid.dims, grid.spacing)]
        got = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        got.setflags(write=False)
        _COORD_CACHE[key] = got
        if len(_COORD_CACHE) > 8:
            _COORD_CACHE.pop(next(iter(_COORD_CACHE)))
    return got


def _world_coords(grid: Grid) -> np.ndarray:
    idx = _scaled_coords(grid) / np.asarray(grid.spacing)
    return grid.index_to_world(idx.reshape(-1, 3)).reshape(grid.dims + (3,))


def reinitialize(state: LevelSetState) -> LevelSetState:
    """Rebuild phi as the signed Euclidean distance to the current zero level set.

    The interface is located by linear interpolation along grid edges
    (marching-cubes vertices); distances are exact to the triangulated
    interface near it and to the interface vertex cloud farther away.
    """
    phi = state.phi
    n_in = int(np.count_nonzero(phi < 0))
    if n_in == 0:
        raise ContourCollapsedError("reinitialize: inside region is empty")
    if n_in == phi.size:
        raise ContourCollapsedError("reinitialize: inside region fills the whole grid")
    new_phi = _signed_distance_to_zero_set(phi, state.grid)
    return replace(state, phi=new_phi)


def _signed_distance_to_zero_set(phi: np.ndarray, grid: Grid,
                                 clamp_beyond: float | None = None) -> np.ndarray:
    """Signed distance to the zero set of phi, exact out to ``clamp_beyond`` mm.

    Voxels with |phi| beyond the clamp (where the evolution never reads values)
    keep their sign with magnitude pinned at the clamp.
    """
    spacing = np.asarray(grid.spacing)
    if not (float(phi.min()) < 0.0 < float(phi.max())):
        raise ContourCollapsedError("reinitialize: field has no zero crossing")
    # marching_cubes requires a writable buffer
    verts, faces, _, _ = measure.marching_cubes(
        np.array(phi), level=0.0, spacing=tuple(spacing), allow_degenerate=False)
    coords = _scaled_coords(grid).reshape(-1, 3)
    h_min = grid.h_min
    phi_flat = phi.reshape(-1)
    if clamp_beyond is None:
        query = np.ones(coords.shape[0], dtype=bool)
    else:
        # |phi| approximates distance to within the per-chunk drift (< a few h)
        query = np.abs(phi_flat) <= clamp_beyond + 4.0 * h_min
    # Densify the interface sample cloud (vertices + edge midpoints + centroids)
    # so the cloud-distance error beyond the refinement cutoff stays << 0.1 h.
    verts64 = verts.astype(np.float64)
    tri_pts = verts64[faces]
    cloud = np.concatenate([
        verts64,
        tri_pts.mean(axis=1),
        0.5 * (tri_pts[:, 0] + tri_pts[:, 1]),
        0.5 * (tri_pts[:, 1] + tri_pts[:, 2]),
        0.5 * (tri_pts[:, 2] + tri_pts[:, 0]),
    ])
    tree = cKDTree(cloud, leafsize=64)
    d_vert, _ = tree.query(coords[query], workers=-1)

    # Near the interface the sample cloud still overestimates; refine with
    # exact point-to-triangle distances there.
    near = d_vert <= 2.5 * h_min
    if near.any():
        tris = np.ascontiguousarray(faces.astype(np.int64))
        mins = verts64.min(axis=0) - h_min
        maxs = verts64.max(axis=0) + h_min
        cell = float(h_min)
        gdims = np.maximum(1, np.ceil((maxs - mins) / cell).astype(np.int64))
        starts, ids = _kernels.build_tri_grid(verts64, tris, mins, cell, gdims)
        pts = np.ascontiguousarray(coords[query][near])
        d_near, _, _ = _kernels.exact_point_mesh(
            pts, np.ascontiguousarray(d_vert[near]), verts64, tris, starts, ids, mins, cell, gdims)
        d_vert[near] = d_near
    sign = np.where(phi_flat < 0, -1.0, 1.0)
    if clamp_beyond is None:
        out = sign * d_vert
    else:
        # Stale values outside the refresh shell drift almost uniformly between
        # reinitializations; re-anchor them with the median mismatch measured
        # on the outer rim of the refreshed shell.
        old_abs = np.abs(phi_flat)
        rim = query & (old_abs >= clamp_beyond + 2.0 * h_min)
        delta = 0.0
        if rim.any():
            delta = float(np.median(d_vert[rim[query]] - old_abs[rim]))
        out = sign * np.maximum(old_abs + delta, clamp_beyond + 2.0 * h_min)
        out[query] = sign[query] * d_vert
    return out.reshape(phi.shape).astype(np.float32)


def _cfl_dt(phi, speed, gs_mag, params: ContourParams, band: float, h_min: float) -> float:
    mask = np.abs(phi) <= band
    s = speed[mask]
    denom_terms = abs(params.propagation_scale) * s \
        + abs(params.advection_scale) * gs_mag[mask] \
        + 6.0 * abs(params.curvature_scale) * s / h_min
    denom = float(denom_terms.max()) if denom_terms.size else 0.0
    if denom <= 0.0:
        return 0.0
    return params.dt_safety * h_min / denom


def advance(state: LevelSetState, speed: SpeedImage, params: ContourParams,
            n_iters: int, roi: np.ndarray | None = None) -> LevelSetState:
    """Run n_iters explicit update steps; returns a new state.

    Reinitialization and time-step recomputation happen whenever the global
    iteration counter crosses a multiple of reinit_interval, so splitting a
    run across several calls is bit-identical to one combined call.
    """
    if n_iters < 1:
        raise ValueError(f"n_iters must be >= 1, got {n_iters}")
    if not state.grid.matches(speed.grid):
        raise GeometryError("advance: speed image geometry does not match the level-set state")
    if roi is not None:
        roi = np.ascontiguousarray(roi.reshape(state.grid.dims).astype(np.uint8))
    else:
        roi = _NO_ROI

    gsx, gsy, gsz = speed_gradient(speed)
    gs_mag = np.sqrt(gsx.astype(np.float64) ** 2 + gsy.astype(np.float64) ** 2
                     + gsz.astype(np.float64) ** 2)
    hx, hy, hz = (np.float32(s) for s in state.grid.spacing)
    h_min = state.grid.h_min
    band = float(state.band_width)
    a_p = np.float32(params.propagation_scale)
    a_c = np.float32(params.curvature_scale)
    a_a = np.float32(params.advection_scale)

    phi = state.phi.copy()
    out = np.empty_like(phi)
    dt = state.dt
    done = state.iterations_done
    # Exact distances are only required where the front can read values before
    # the next reinitialization; beyond that shell stale values are re-anchored.
    r_exact = min(band, 6.0 * h_min)
    for k in range(done, done + n_iters):
        if k % params.reinit_interval == 0:
            if k > 0:
                phi = _signed_distance_to_zero_set(phi, state.grid, clamp_beyond=r_exact)
            dt = _cfl_dt(phi, speed.data, gs_mag, params, band, h_min)
        elif dt is None:
            dt = _cfl_dt(phi, speed.data, gs_mag, params, band, h_min)
        if dt == 0.0:  # all flow terms are zero: field is stationary
            continue
        _kernels.gac_step(phi, out, speed.data, gsx, gsy, gsz, roi,
                          np.float32(dt), hx, hy, hz, a_p, a_c, a_a, np.float32(band))
        phi, out = out, phi
        n_in = int(np.count_nonzero(phi < 0))
        if n_in == 0:
            raise ContourCollapsedError("contour vanished (inside region is empty)",
                                        iterations_completed=k - done)
        if n_in == phi.size:
            raise ContourCollapsedError("contour filled the whole grid",
                                        iterations_completed=k - done)
    return LevelSetState(state.grid, phi, band_width=state.band_width,
                         iterations_done=done + n_iters, dt=dt)
