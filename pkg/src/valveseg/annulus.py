"""Annulus curve fitting: smooth closed curve, best-fit plane, probe-facing normal."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import AnnulusFitError

N_CURVE_SAMPLES = 100
MIN_POINTS = 6
MIN_POINT_GAP_MM = 0.1
DEFAULT_PROBE_DIR = (0.0, 0.0, -1.0)  # negative image-depth axis


@dataclass(frozen=True)
class AnnulusDefinition:
    """Ordered user-placed points around the annulus, plus the probe direction."""

    points: np.ndarray
    probe_dir: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise AnnulusFitError(f"points must be (N, 3), got {pts.shape}")
        if len(pts) < MIN_POINTS:
            raise AnnulusFitError(f"too few points: need >= {MIN_POINTS}, got {len(pts)}")
        closed = np.vstack([pts, pts[:1]])
        gaps = np.linalg.norm(np.diff(closed, axis=0), axis=1)
        if np.any(gaps < MIN_POINT_GAP_MM):
            raise AnnulusFitError(f"consecutive points closer than {MIN_POINT_GAP_MM} mm")
        centered = pts - pts.mean(axis=0)
        sv = np.linalg.svd(centered, compute_uv=False)
        if sv[1] < 1e-9 * max(sv[0], 1.0):
            raise AnnulusFitError("points are collinear; annulus plane is degenerate")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.probe_dir is not None:
            pd = np.asarray(self.probe_dir, dtype=np.float64).reshape(3)
            n = np.linalg.norm(pd)
            if n == 0:
                raise AnnulusFitError("probe_dir must be nonzero")
            pd = pd / n
            pd.setflags(write=False)
            object.__setattr__(self, "probe_dir", pd)


@dataclass(frozen=True)
class AnnulusModel:
    """Fitted closed curve (100 uniform-arc-length samples) with its TLS plane."""

    samples: np.ndarray = field(repr=False)
    centroid: np.ndarray
    plane_normal: np.ndarray
    plane_offset: float
    probe_dir: np.ndarray

    def __post_init__(self):
        for name in ("samples", "centroid", "plane_normal", "probe_dir"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def max_radius(self) -> float:
        return float(np.linalg.norm(self.samples - self.centroid, axis=1).max())


def fit_annulus(defn: AnnulusDefinition) -> AnnulusModel:
    """Periodic cubic spline through the points, resampled to uniform arc length.

    The plane is the total-least-squares fit to the curve samples; the normal
    sign is chosen so plane_normal . probe_dir > 0.
    """
    pts = defn.points
    closed = np.vstack([pts, pts[:1]])
    chord = np.linalg.norm(np.diff(closed, axis=0), axis=1)
    t = np.concatenate([[0.0], np.cumsum(chord)])
    spline = CubicSpline(t, closed, axis=0, bc_type="periodic")

    # Dense evaluation, then invert cumulative arc length for uniform spacing.
    dense_t = np.linspace(0.0, t[-1], 40 * len(pts) + 1)
    dense = spline(dense_t)
    seg = np.linalg.norm(np.diff(dense, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    targets = np.linspace(0.0, arc[-1], N_CURVE_SAMPLES + 1)[:-1]
    sample_t = np.interp(targets, arc, dense_t)
    samples = spline(sample_t)

    centroid = samples.mean(axis=0)
    centered = samples - centroid
    cov = centered.T @ centered
    eigvals, eigvecs = np.linalg.eigh(cov)
    normal = eigvecs[:, 0]  # smallest principal direction

    probe = np.asarray(defn.probe_dir if defn.probe_dir is not None else DEFAULT_PROBE_DIR, float)
    probe = probe / np.linalg.norm(probe)
    d = float(normal @ probe)
    if d == 0.0:
        raise AnnulusFitError("probe direction lies in the annulus plane; orientation is ambiguous")
    if d < 0:
        normal = -normal
    offset = float(normal @ centroid)
    return AnnulusModel(samples=samples, centroid=centroid, plane_normal=normal,
                        plane_offset=offset, probe_dir=probe)


def signed_height(p, model: AnnulusModel):
    """Signed distance of world point(s) from the annulus plane; positive is the probe side."""
    p = np.asarray(p, dtype=np.float64)
    return p @ model.plane_normal - model.plane_offset


def read_annulus_json(path) -> AnnulusDefinition:
    """Read annulus points from JSON: either a bare array of {x,y,z} or
    {"points": [...], "probe_dir": [x,y,z]}."""
    with open(path) as fh:
        doc = json.load(fh)
    probe_dir = None
    if isinstance(doc, dict):
        raw_pts = doc["points"]
        if doc.get("probe_dir") is not None:
            probe_dir = np.asarray(doc["probe_dir"], dtype=np.float64)
    else:
        raw_pts = doc
    pts = np.asarray([[p["x"], p["y"], p["z"]] for p in raw_pts], dtype=np.float64)
    return AnnulusDefinition(points=pts, probe_dir=probe_dir)


def write_annulus_json(defn: AnnulusDefinition, path):
    doc = {"points": [{"x": float(x), "y": float(y), "z": float(z)} for x, y, z in defn.points]}
    if defn.probe_dir is not None:
        doc["probe_dir"] = [float(v) for v in defn.probe_dir]
    Path(path).write_text(json.dumps(doc, indent=1))
