"""Synthetic TEE-like phantom with exact analytic ground truth.

Geometry: a dark spherical "atrial" cavity embedded in bright tissue, closed
across its equator by a curved leaflet shell (a spherical-cap bowl sagging
away from the probe). Both ground-truth masks come from the same implicit
functions that paint the image, so they are exact by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .annulus import AnnulusDefinition
from .mesh import TriMesh, marching_cubes, submesh
from .volume import Grid, LabelMask, Volume3D


@dataclass(frozen=True)
class PhantomSpec:
    dims: tuple[int, int, int] = (96, 96, 96)
    spacing: tuple[float, float, float] = (0.45, 0.45, 0.45)
    atrium_radius: float = 16.0
    leaflet_thickness: float = 1.5
    leaflet_coverage: float = 1.0
    bowl_depth_frac: float = 0.89  # bowl depth below the annulus plane, as fraction of radius
    intensities: tuple[float, float] = (20.0, 180.0)  # (blood, tissue)
    noise_sigma: float = 8.0
    rng_seed: int = 1234

    def __post_init__(self):
        if not (0.0 < self.leaflet_coverage <= 1.0):
            raise ValueError("leaflet_coverage must be in (0, 1]")
        if self.leaflet_thickness < 2.0 * min(self.spacing):
            raise ValueError("leaflet_thickness must be >= 2x the smallest spacing")
        if not (0.1 < self.bowl_depth_frac < 1.0):
            raise ValueError("bowl_depth_frac must be in (0.1, 1)")
        extent = np.asarray(self.dims) * np.asarray(self.spacing)
        if np.any(self.atrium_radius + 5.0 > extent / 2.0):
            raise ValueError("atrium must fit inside the volume with a 5 mm margin")

    def to_dict(self) -> dict:
        return {
            "dims": list(self.dims), "spacing": list(self.spacing),
            "atrium_radius": self.atrium_radius,
            "leaflet_thickness": self.leaflet_thickness,
            "leaflet_coverage": self.leaflet_coverage,
            "bowl_depth_frac": self.bowl_depth_frac,
            "intensities": list(self.intensities),
            "noise_sigma": self.noise_sigma, "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PhantomSpec":
        kwargs = dict(doc)
        for key in ("dims", "spacing", "intensities"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)


@dataclass(frozen=True)
class PhantomResult:
    volume: Volume3D
    gt_bloodpool: LabelMask
    gt_leaflet: LabelMask
    annulus: AnnulusDefinition
    probe_dir: np.ndarray
    geometry: dict = field(default_factory=dict)  # analytic parameters for oracles


def _bowl_parameters(spec: PhantomSpec):
    r_eq = spec.atrium_radius
    depth = spec.bowl_depth_frac * spec.atrium_radius
    h_l = (r_eq ** 2 - depth ** 2) / (2.0 * depth)  # cap-sphere center height above plane
    return depth, h_l, h_l + depth  # depth, center offset, cap-sphere radius


def generate_phantom(spec: PhantomSpec) -> PhantomResult:
    grid = Grid(spec.dims, spec.spacing, np.zeros(3), np.eye(3))
    axes = [np.arange(n, dtype=np.float64) * s for n, s in zip(spec.dims, spec.spacing)]
    x, y, z = np.meshgrid(*axes, indexing="ij")
    center = (np.asarray(spec.dims, float) - 1.0) / 2.0 * np.asarray(spec.spacing)
    cx, cy, cz = center
    z_plane = cz  # annulus plane through the cavity equator

    depth, h_l, r_cap = _bowl_parameters(spec)
    c_lx, c_ly, c_lz = cx, cy, cz + h_l
    half_th = spec.leaflet_thickness / 2.0

    r_cavity = np.sqrt((x - cx) ** 2 + (y - cy) ** 2 + (z - cz) ** 2)
    r_cap_dist = np.sqrt((x - c_lx) ** 2 + (y - c_ly) ** 2 + (z - c_lz) ** 2)
    rho = np.sqrt((x - cx) ** 2 + (y - cy) ** 2)
    r_open = spec.atrium_radius * np.sqrt(1.0 - spec.leaflet_coverage)

    shell = ((z <= z_plane)
             & (np.abs(r_cap_dist - r_cap) <= half_th)
             & (rho >= r_open)
             & (r_cavity <= spec.atrium_radius))
    blood = (r_cavity < spec.atrium_radius) & ~shell
    atrial = (z > z_plane) | (r_cap_dist < r_cap - half_th)
    gt_bp = blood & atrial if spec.leaflet_coverage >= 1.0 else blood

    img = np.full(spec.dims, spec.intensities[1], dtype=np.float64)
    img[blood] = spec.intensities[0]
    if spec.noise_sigma > 0:
        rng = np.random.default_rng(spec.rng_seed)
        img = img + rng.normal(0.0, spec.noise_sigma, size=img.shape)

    theta = np.linspace(0.0, 2.0 * np.pi, 13)[:-1]
    ann_pts = np.stack([
        cx + spec.atrium_radius * np.cos(theta),
        cy + spec.atrium_radius * np.sin(theta),
        np.full_like(theta, z_plane)], axis=1)
    probe_dir = np.array([0.0, 0.0, 1.0])

    geometry = {
        "center": center.tolist(), "z_plane": z_plane,
        "cap_center": [c_lx, c_ly, c_lz], "cap_radius": r_cap,
        "half_thickness": half_th, "bowl_depth": depth, "r_open": r_open,
    }
    return PhantomResult(
        volume=Volume3D(grid, img.astype(np.float32)),
        gt_bloodpool=LabelMask(grid, gt_bp),
        gt_leaflet=LabelMask(grid, shell),
        annulus=AnnulusDefinition(points=ann_pts, probe_dir=probe_dir),
        probe_dir=probe_dir,
        geometry=geometry,
    )


def gt_leaflet_mesh(result: PhantomResult) -> TriMesh:
    """Triangulated surface of the ground-truth leaflet mask."""
    return marching_cubes(result.gt_leaflet)


def gt_atrial_surface_mesh(result: PhantomResult) -> TriMesh:
    """Atrial-facing (probe-side) face of the ground-truth leaflet shell.

    Selected analytically: vertices on the inner cap-sphere surface, below the
    annulus plane, using the same implicit parameters that built the phantom.
    """
    mesh = marching_cubes(result.gt_leaflet)
    g = result.geometry
    cap_center = np.asarray(g["cap_center"])
    inner_r = g["cap_radius"] - g["half_thickness"]
    tol = 0.75 * max(result.volume.grid.spacing)
    r = np.linalg.norm(mesh.vertices - cap_center, axis=1)
    keep = (np.abs(r - inner_r) <= tol) & (mesh.vertices[:, 2] <= g["z_plane"] + tol)
    return submesh(mesh, keep)
