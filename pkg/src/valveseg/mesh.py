"""Triangle meshes: isosurface extraction and STL/PLY export.

Meshes live in world millimetres. Normals point toward increasing field
values, i.e. outward for the signed-distance convention (negative inside).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from skimage import measure

from .errors import EmptySurfaceError, ValveSegError
from .volume import LabelMask

STL_BINARY = "STL_BINARY"
PLY_ASCII = "PLY_ASCII"

_FORMAT_EXT = {STL_BINARY: ".stl", PLY_ASCII: ".ply"}


@dataclass(frozen=True)
class TriMesh:
    """Vertices (V,3) mm, triangles (T,3) vertex indices, unit vertex normals (V,3)."""

    vertices: np.ndarray = field(repr=False)
    triangles: np.ndarray = field(repr=False)
    normals: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64))
        t = np.ascontiguousarray(np.asarray(self.triangles, dtype=np.int64))
        n = np.ascontiguousarray(np.asarray(self.normals, dtype=np.float64))
        if v.ndim != 2 or v.shape[1] != 3 or n.shape != v.shape or t.ndim != 2 or t.shape[1] != 3:
            raise ValveSegError("TriMesh arrays must be (V,3) vertices/normals and (T,3) triangles")
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise ValveSegError("TriMesh triangle references an out-of-range vertex")
        for arr in (v, t, n):
            arr.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        object.__setattr__(self, "normals", n)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def face_normals(self, normalized: bool = True) -> np.ndarray:
        a = self.vertices[self.triangles[:, 0]]
        b = self.vertices[self.triangles[:, 1]]
        c = self.vertices[self.triangles[:, 2]]
        fn = np.cross(b - a, c - a)
        if normalized:
            lens = np.linalg.norm(fn, axis=1)
            lens[lens == 0] = 1.0
            fn = fn / lens[:, None]
        return fn

    def area(self) -> float:
        return float(0.5 * np.linalg.norm(self.face_normals(normalized=False), axis=1).sum())

    def signed_volume(self) -> float:
        a = self.vertices[self.triangles[:, 0]]
        b = self.vertices[self.triangles[:, 1]]
        c = self.vertices[self.triangles[:, 2]]
        return float(np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0)


def vertex_normals(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Area-weighted average of incident face normals, normalized."""
    a = vertices[triangles[:, 0]]
    b = vertices[triangles[:, 1]]
    c = vertices[triangles[:, 2]]
    fn = np.cross(b - a, c - a)  # length encodes 2x area
    out = np.zeros_like(vertices)
    for col in range(3):
        np.add.at(out, triangles[:, col], fn)
    lens = np.linalg.norm(out, axis=1)
    lens[lens == 0] = 1.0
    return out / lens[:, None]


def _as_field(obj, iso: float):
    if isinstance(obj, LabelMask):
        return np.where(obj.data, -0.5, 0.5).astype(np.float32), 0.0, obj.grid
    return np.asarray(obj.phi, dtype=np.float32), float(iso), obj.grid


def marching_cubes(obj, iso: float = 0.0) -> TriMesh:
    """Watertight triangulated isosurface of a LevelSetState or LabelMask.

    Masks are converted to a -0.5/+0.5 indicator and extracted at 0. Surfaces
    are closed at the volume faces by padding with an outside value. Triangle
    winding is normalized so normals point toward increasing field values.
    """
    data, level, grid = _as_field(obj, iso)
    lo, hi = float(data.min()), float(data.max())
    if not (lo < level < hi):
        raise EmptySurfaceError(f"no isosurface at level {level} (field range [{lo}, {hi}])")
    pad_value = np.float32(max(level + max(grid.spacing), hi))
    padded = np.pad(data, 1, constant_values=pad_value)
    verts, faces, _, _ = measure.marching_cubes(
        padded, level=level, spacing=tuple(grid.spacing), allow_degenerate=False)
    verts = verts - np.asarray(grid.spacing)  # undo the pad shift
    # scaled-index -> world
    idx = verts / np.asarray(grid.spacing)
    world = grid.index_to_world(idx)

    faces = _orient_toward_increasing_field(data, grid, verts, faces, level)
    world, faces = _drop_degenerate(world, faces)
    if len(faces) == 0:
        raise EmptySurfaceError("isosurface is degenerate (no non-zero-area triangles)")
    return TriMesh(world, faces, vertex_normals(world, faces))


def _orient_toward_increasing_field(data, grid, verts_scaled, faces, level) -> np.ndarray:
    centroids = verts_scaled[faces].mean(axis=1) / np.asarray(grid.spacing)
    dims = np.asarray(grid.dims)
    # border-closure faces sit outside the data; judge winding from interior
    # faces only, where the sampled gradient is trustworthy
    interior = np.all((centroids >= 0.5) & (centroids <= dims - 1.5), axis=1)
    judged = faces[interior] if interior.any() else faces
    probe = np.clip(centroids[interior] if interior.any() else centroids, 0, dims - 1)
    gx, gy, gz = np.gradient(data.astype(np.float64), *grid.spacing)
    base = np.clip(np.floor(probe).astype(int), 0, dims - 2)
    g = np.stack([gx[tuple(base.T)], gy[tuple(base.T)], gz[tuple(base.T)]], axis=1)
    a = verts_scaled[judged[:, 0]]
    b = verts_scaled[judged[:, 1]]
    c = verts_scaled[judged[:, 2]]
    fn = np.cross(b - a, c - a)
    score = float(np.einsum("ij,ij->i", fn, g).sum())
    # Cross products map to world space with the cofactor matrix, so an
    # improper orientation matrix flips the world-space winding sense.
    if score * np.linalg.det(grid.orientation) < 0:
        faces = faces[:, ::-1].copy()
    return faces


def _drop_degenerate(verts, faces):
    a = verts[faces[:, 0]]
    b = verts[faces[:, 1]]
    c = verts[faces[:, 2]]
    areas = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
    faces = faces[areas > 1e-12]
    used = np.unique(faces)
    remap = np.full(len(verts), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    return verts[used], remap[faces]


def submesh(mesh: TriMesh, keep_vertices: np.ndarray, any_kept: bool = False) -> TriMesh:
    """Sub-mesh of triangles whose vertices are kept (all three, or any, of them).

    Vertex positions and normals are carried over unchanged; isolated vertices
    are dropped.
    """
    keep_vertices = np.asarray(keep_vertices, dtype=bool)
    flags = keep_vertices[mesh.triangles]
    tri_keep = flags.any(axis=1) if any_kept else flags.all(axis=1)
    faces = mesh.triangles[tri_keep]
    used = np.unique(faces)
    remap = np.full(mesh.n_vertices, -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    return TriMesh(mesh.vertices[used], remap[faces], mesh.normals[used])


def transformed(mesh: TriMesh, rotation=None, translation=None) -> TriMesh:
    r = np.eye(3) if rotation is None else np.asarray(rotation, dtype=np.float64)
    t = np.zeros(3) if translation is None else np.asarray(translation, dtype=np.float64)
    return TriMesh(mesh.vertices @ r.T + t, mesh.triangles, mesh.normals @ r.T)


# ---------------------------------------------------------------------------
# Export / import
# ---------------------------------------------------------------------------

def export_mesh(mesh: TriMesh, fmt: str, path) -> None:
    """Write a mesh as binary STL or ASCII PLY."""
    if mesh.n_triangles == 0:
        raise ValveSegError("refusing to export an empty mesh")
    if fmt == STL_BINARY:
        data = stl_binary_bytes(mesh)
    elif fmt == PLY_ASCII:
        data = ply_ascii_bytes(mesh)
    else:
        raise ValueError(f"unknown mesh format {fmt!r}")
    with open(path, "wb") as fh:
        fh.write(data)


def stl_binary_bytes(mesh: TriMesh) -> bytes:
    """80-byte header, uint32 facet count, 50-byte little-endian facets."""
    n = mesh.n_triangles
    header = b"valveseg binary STL".ljust(80, b" ")
    fn = mesh.face_normals().astype("<f4")
    tri = mesh.vertices[mesh.triangles].astype("<f4")  # (T,3,3)
    body = np.zeros(n, dtype=np.dtype([
        ("normal", "<f4", 3), ("verts", "<f4", (3, 3)), ("attr", "<u2")]))
    body["normal"] = fn
    body["verts"] = tri
    return header + struct.pack("<I", n) + body.tobytes()


def ply_ascii_bytes(mesh: TriMesh) -> bytes:
    lines = [
        "ply",
        "format ascii 1.0",
        "comment produced by valveseg",
        f"element vertex {mesh.n_vertices}",
        "property float x", "property float y", "property float z",
        "property float nx", "property float ny", "property float nz",
        f"element face {mesh.n_triangles}",
        "property list uchar int vertex_indices",
        "end_header",
    ]
    for v, nrm in zip(mesh.vertices, mesh.normals):
        lines.append("%.9g %.9g %.9g %.9g %.9g %.9g" % (v[0], v[1], v[2], nrm[0], nrm[1], nrm[2]))
    for t in mesh.triangles:
        lines.append(f"3 {t[0]} {t[1]} {t[2]}")
    return ("\n".join(lines) + "\n").encode("ascii")


def load_stl(path) -> TriMesh:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 84:
        raise ValveSegError("not a binary STL: too short")
    n = struct.unpack("<I", raw[80:84])[0]
    if len(raw) != 84 + 50 * n:
        raise ValveSegError(f"binary STL size mismatch: {len(raw)} bytes for {n} facets")
    body = np.frombuffer(raw[84:], dtype=np.dtype([
        ("normal", "<f4", 3), ("verts", "<f4", (3, 3)), ("attr", "<u2")]))
    tris_pts = body["verts"].astype(np.float64).reshape(-1, 3)
    verts, inverse = np.unique(tris_pts.round(6), axis=0, return_inverse=True)
    faces = inverse.reshape(-1, 3)
    return TriMesh(verts, faces, vertex_normals(verts, faces))


def load_ply(path) -> TriMesh:
    with open(path, "rb") as fh:
        text = fh.read().decode("ascii")
    lines = text.splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ValveSegError("not a PLY file")
    n_vert = n_face = None
    body_at = None
    for i, line in enumerate(lines):
        parts = line.split()
        if parts[:2] == ["element", "vertex"]:
            n_vert = int(parts[2])
        elif parts[:2] == ["element", "face"]:
            n_face = int(parts[2])
        elif parts[:1] == ["end_header"]:
            body_at = i + 1
            break
    if body_at is None or n_vert is None or n_face is None:
        raise ValveSegError("PLY header missing vertex/face counts")
    vdata = np.array([[float(x) for x in lines[body_at + i].split()] for i in range(n_vert)])
    fdata = np.array([[int(x) for x in lines[body_at + n_vert + i].split()[1:4]] for i in range(n_face)],
                     dtype=np.int64)
    verts = vdata[:, :3]
    normals = vdata[:, 3:6] if vdata.shape[1] >= 6 else vertex_normals(verts, fdata)
    return TriMesh(verts, fdata, normals)


def format_for_extension(ext: str) -> str:
    ext = ext.lower().lstrip(".")
    if ext == "stl":
        return STL_BINARY
    if ext == "ply":
        return PLY_ASCII
    raise ValueError(f"unsupported mesh extension .{ext}")


def extension_for_format(fmt: str) -> str:
    return _FORMAT_EXT[fmt]
