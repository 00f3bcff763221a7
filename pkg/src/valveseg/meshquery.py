"""Exact point-to-mesh distances and segment visibility over a uniform triangle grid.

The spatial index only prunes candidates; results equal brute-force evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from . import _kernels
from .mesh import TriMesh


@dataclass
class MeshIndex:
    """Uniform-grid triangle index plus a vertex KD-tree for distance bounds."""

    mesh: TriMesh
    verts: np.ndarray
    tris: np.ndarray
    starts: np.ndarray
    ids: np.ndarray
    mins: np.ndarray
    cell: float
    gdims: np.ndarray
    vertex_tree: cKDTree


def build_index(mesh: TriMesh, max_cells: int = 192) -> MeshIndex:
    verts = np.ascontiguousarray(mesh.vertices, dtype=np.float64)
    tris = np.ascontiguousarray(mesh.triangles, dtype=np.int64)
    lo = verts.min(axis=0)
    hi = verts.max(axis=0)
    extent = float(max(hi - lo))
    edges = np.linalg.norm(verts[tris[:, 1]] - verts[tris[:, 0]], axis=1)
    cell = max(2.0 * float(np.median(edges)), extent / max_cells, 1e-6)
    mins = lo - cell
    gdims = np.maximum(1, np.ceil((hi + cell - mins) / cell).astype(np.int64))
    starts, ids = _kernels.build_tri_grid(verts, tris, mins, cell, gdims)
    return MeshIndex(mesh=mesh, verts=verts, tris=tris, starts=starts, ids=ids,
                     mins=mins, cell=float(cell), gdims=gdims,
                     vertex_tree=cKDTree(verts, leafsize=64))


def point_mesh_distances(points, index: MeshIndex):
    """Exact distances from points to the mesh surface.

    Returns (distances, closest triangle indices, closest points).
    """
    pts = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
    d_bound, _ = index.vertex_tree.query(pts, workers=-1)
    return _kernels.exact_point_mesh(
        pts, np.ascontiguousarray(d_bound, dtype=np.float64),
        index.verts, index.tris, index.starts, index.ids,
        index.mins, index.cell, index.gdims)


def closest_surface_normals(points, index: MeshIndex) -> np.ndarray:
    """Unit normals at the closest surface points (barycentric vertex-normal blend)."""
    pts = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
    _, tri_idx, qpts = point_mesh_distances(pts, index)
    tris = index.tris[tri_idx]
    a = index.verts[tris[:, 0]]
    b = index.verts[tris[:, 1]]
    c = index.verts[tris[:, 2]]
    u, v, w = _barycentric(qpts, a, b, c)
    n = (u[:, None] * index.mesh.normals[tris[:, 0]]
         + v[:, None] * index.mesh.normals[tris[:, 1]]
         + w[:, None] * index.mesh.normals[tris[:, 2]])
    lens = np.linalg.norm(n, axis=1)
    lens[lens == 0] = 1.0
    return n / lens[:, None]


def _barycentric(p, a, b, c):
    v0 = b - a
    v1 = c - a
    v2 = p - a
    d00 = np.einsum("ij,ij->i", v0, v0)
    d01 = np.einsum("ij,ij->i", v0, v1)
    d11 = np.einsum("ij,ij->i", v1, v1)
    d20 = np.einsum("ij,ij->i", v2, v0)
    d21 = np.einsum("ij,ij->i", v2, v1)
    denom = d00 * d11 - d01 * d01
    denom[denom == 0] = 1.0
    v = (d11 * d20 - d01 * d21) / denom
    w = (d00 * d21 - d01 * d20) / denom
    v = np.clip(v, 0.0, 1.0)
    w = np.clip(w, 0.0, 1.0 - v)
    return 1.0 - v - w, v, w


def visible_from(points, origin, index: MeshIndex, eps: float) -> np.ndarray:
    """Boolean mask: True where the open segment origin -> (point shortened by
    eps at the point end) intersects no triangle of the indexed mesh."""
    pts = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
    origin = np.ascontiguousarray(origin, dtype=np.float64).reshape(3)
    mask = _kernels.visibility_mask(pts, origin, float(eps), index.verts, index.tris,
                                    index.starts, index.ids, index.mins, index.cell, index.gdims)
    return mask.astype(bool)
