"""Proximal (probe-facing) leaflet surface extraction.

Two per-vertex geometric tests, split by the annulus plane:

* at or above the plane: keep a vertex iff the open segment from the annulus
  centroid to it (shortened at the vertex end) passes through no triangle of
  the leaflet mesh, i.e. the vertex is on the inner, visible surface;
* below the plane: keep a vertex iff the angle between its normal and the
  normal at the closest blood-pool surface point exceeds the threshold
  (default 100 degrees), which discards wall-parallel outer surface.
"""

from __future__ import annotations

import numpy as np

from .annulus import AnnulusModel, signed_height
from .errors import EmptyProximalSurfaceError
from .mesh import TriMesh, submesh
from .meshquery import build_index, closest_surface_normals, visible_from

ANGLE_THRESHOLD_DEG = 100.0


def extract_proximal(leaflet: TriMesh, bloodpool: TriMesh, annulus: AnnulusModel,
                     eps: float | None = None, angle_deg: float = ANGLE_THRESHOLD_DEG,
                     any_kept: bool = False) -> TriMesh:
    """Open proximal sub-mesh of the leaflet mesh (vertex/triangle subsets).

    ``eps`` shortens the visibility segment at the vertex end to avoid the
    degenerate self-hit; defaults to a quarter of the median edge length
    (callers with grid context pass 0.25 * h_min).
    """
    if leaflet.n_triangles == 0 or bloodpool.n_triangles == 0:
        raise EmptyProximalSurfaceError("leaflet and blood-pool meshes must be non-empty")
    if eps is None:
        edges = np.linalg.norm(
            leaflet.vertices[leaflet.triangles[:, 1]] - leaflet.vertices[leaflet.triangles[:, 0]],
            axis=1)
        eps = 0.25 * float(np.median(edges))

    heights = signed_height(leaflet.vertices, annulus)
    above = heights >= 0.0
    keep = np.zeros(leaflet.n_vertices, dtype=bool)

    if above.any():
        leaflet_index = build_index(leaflet)
        keep[above] = visible_from(leaflet.vertices[above], annulus.centroid,
                                   leaflet_index, eps)
    below = ~above
    if below.any():
        bp_index = build_index(bloodpool)
        bp_normals = closest_surface_normals(leaflet.vertices[below], bp_index)
        cosang = np.einsum("ij,ij->i", leaflet.normals[below], bp_normals)
        angle = np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0)))
        keep[below] = angle > angle_deg

    if not keep.any():
        raise EmptyProximalSurfaceError("no leaflet vertex passed the proximal-surface tests")
    result = submesh(leaflet, keep, any_kept=any_kept)
    if result.n_triangles == 0:
        raise EmptyProximalSurfaceError("proximal surface has no complete triangles")
    return result
