"""Numba kernels: level-set update step and triangle-mesh spatial queries.

Every parallel kernel writes each output element exactly once from read-only
inputs, so results are bit-identical for any thread count.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, prange


@njit(parallel=True, fastmath=False, cache=True)
def gac_step(phi, out, speed, gsx, gsy, gsz, roi, dt, hx, hy, hz, a_p, a_c, a_a, band):
    """One explicit upwind geodesic-active-contour update (Jacobi, band-restricted).

    Propagation uses Godunov upwinding, advection per-component upwinding,
    curvature central differences. Borders clamp to the edge value. Voxels
    outside the band, or with roi == 0, are copied unchanged.
    """
    nx, ny, nz = phi.shape
    use_roi = roi.size == phi.size
    roi3 = roi.reshape(phi.shape) if use_roi else roi.reshape((1, 1, 1))
    for i in prange(nx):
        for j in range(ny):
            for k in range(nz):
                p = phi[i, j, k]
                if abs(p) > band or (use_roi and roi3[i, j, k] == 0):
                    out[i, j, k] = p
                    continue
                im = phi[i - 1, j, k] if i > 0 else p
                ip = phi[i + 1, j, k] if i < nx - 1 else p
                jm = phi[i, j - 1, k] if j > 0 else p
                jp = phi[i, j + 1, k] if j < ny - 1 else p
                km = phi[i, j, k - 1] if k > 0 else p
                kp = phi[i, j, k + 1] if k < nz - 1 else p
                dxm = (p - im) / hx
                dxp = (ip - p) / hx
                dym = (p - jm) / hy
                dyp = (jp - p) / hy
                dzm = (p - km) / hz
                dzp = (kp - p) / hz
                s = speed[i, j, k]
                rhs = np.float32(0.0)
                if a_p != 0.0:
                    F = a_p * s
                    if F > 0.0:
                        g2 = (max(dxm, 0.0) ** 2 + min(dxp, 0.0) ** 2
                              + max(dym, 0.0) ** 2 + min(dyp, 0.0) ** 2
                              + max(dzm, 0.0) ** 2 + min(dzp, 0.0) ** 2)
                    else:
                        g2 = (min(dxm, 0.0) ** 2 + max(dxp, 0.0) ** 2
                              + min(dym, 0.0) ** 2 + max(dyp, 0.0) ** 2
                              + min(dzm, 0.0) ** 2 + max(dzp, 0.0) ** 2)
                    rhs -= F * np.float32(math.sqrt(g2))
                if a_a != 0.0:
                    gx = gsx[i, j, k]
                    gy = gsy[i, j, k]
                    gz = gsz[i, j, k]
                    adv = (gx * (dxm if gx < 0.0 else dxp)
                           + gy * (dym if gy < 0.0 else dyp)
                           + gz * (dzm if gz < 0.0 else dzp))
                    rhs += a_a * adv
                if a_c != 0.0:
                    dx = (ip - im) / (np.float32(2.0) * hx)
                    dy = (jp - jm) / (np.float32(2.0) * hy)
                    dz = (kp - km) / (np.float32(2.0) * hz)
                    den = dx * dx + dy * dy + dz * dz
                    if den > np.float32(1e-12):
                        i0 = max(i - 1, 0)
                        i1 = min(i + 1, nx - 1)
                        j0 = max(j - 1, 0)
                        j1 = min(j + 1, ny - 1)
                        k0 = max(k - 1, 0)
                        k1 = min(k + 1, nz - 1)
                        dxx = (ip - np.float32(2.0) * p + im) / (hx * hx)
                        dyy = (jp - np.float32(2.0) * p + jm) / (hy * hy)
                        dzz = (kp - np.float32(2.0) * p + km) / (hz * hz)
                        dxy = (phi[i1, j1, k] - phi[i1, j0, k] - phi[i0, j1, k] + phi[i0, j0, k]) \
                            / (np.float32(4.0) * hx * hy)
                        dxz = (phi[i1, j, k1] - phi[i1, j, k0] - phi[i0, j, k1] + phi[i0, j, k0]) \
                            / (np.float32(4.0) * hx * hz)
                        dyz = (phi[i, j1, k1] - phi[i, j1, k0] - phi[i, j0, k1] + phi[i, j0, k0]) \
                            / (np.float32(4.0) * hy * hz)
                        kgrad = (dxx * (dy * dy + dz * dz) + dyy * (dx * dx + dz * dz)
                                 + dzz * (dx * dx + dy * dy)
                                 - np.float32(2.0) * (dx * dy * dxy + dx * dz * dxz + dy * dz * dyz))
                        rhs += a_c * s * kgrad / den
                out[i, j, k] = p + dt * rhs


# ---------------------------------------------------------------------------
# Uniform-grid spatial index over triangles
# ---------------------------------------------------------------------------

@njit(cache=True)
def _tri_cell_range(verts, tris, t, mins, cell, gdims):
    pad = np.float32(1e-4) * cell
    a = tris[t, 0]
    b = tris[t, 1]
    c = tris[t, 2]
    lo = np.empty(3, np.int64)
    hi = np.empty(3, np.int64)
    for ax in range(3):
        vmin = min(verts[a, ax], min(verts[b, ax], verts[c, ax])) - pad
        vmax = max(verts[a, ax], max(verts[b, ax], verts[c, ax])) + pad
        lo[ax] = max(0, min(gdims[ax] - 1, int(math.floor((vmin - mins[ax]) / cell))))
        hi[ax] = max(0, min(gdims[ax] - 1, int(math.floor((vmax - mins[ax]) / cell))))
    return lo, hi


@njit(cache=True)
def build_tri_grid(verts, tris, mins, cell, gdims):
    """Bin triangles into a uniform grid by AABB overlap. Returns CSR arrays."""
    ncell = gdims[0] * gdims[1] * gdims[2]
    counts = np.zeros(ncell + 1, np.int64)
    for t in range(tris.shape[0]):
        lo, hi = _tri_cell_range(verts, tris, t, mins, cell, gdims)
        for cx in range(lo[0], hi[0] + 1):
            for cy in range(lo[1], hi[1] + 1):
                for cz in range(lo[2], hi[2] + 1):
                    counts[1 + cx * gdims[1] * gdims[2] + cy * gdims[2] + cz] += 1
    starts = np.cumsum(counts)
    fill = starts[:-1].copy()
    ids = np.empty(starts[-1], np.int64)
    for t in range(tris.shape[0]):
        lo, hi = _tri_cell_range(verts, tris, t, mins, cell, gdims)
        for cx in range(lo[0], hi[0] + 1):
            for cy in range(lo[1], hi[1] + 1):
                for cz in range(lo[2], hi[2] + 1):
                    c = cx * gdims[1] * gdims[2] + cy * gdims[2] + cz
                    ids[fill[c]] = t
                    fill[c] += 1
    return starts, ids


@njit(cache=True)
def _closest_point_tri(ax, ay, az, bx, by, bz, cx, cy, cz, px, py, pz):
    """Closest point on triangle ABC to P (Ericson, Real-Time Collision Detection)."""
    abx, aby, abz = bx - ax, by - ay, bz - az
    acx, acy, acz = cx - ax, cy - ay, cz - az
    apx, apy, apz = px - ax, py - ay, pz - az
    d1 = abx * apx + aby * apy + abz * apz
    d2 = acx * apx + acy * apy + acz * apz
    if d1 <= 0.0 and d2 <= 0.0:
        return ax, ay, az
    bpx, bpy, bpz = px - bx, py - by, pz - bz
    d3 = abx * bpx + aby * bpy + abz * bpz
    d4 = acx * bpx + acy * bpy + acz * bpz
    if d3 >= 0.0 and d4 <= d3:
        return bx, by, bz
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        v = d1 / (d1 - d3)
        return ax + v * abx, ay + v * aby, az + v * abz
    cpx, cpy, cpz = px - cx, py - cy, pz - cz
    d5 = abx * cpx + aby * cpy + abz * cpz
    d6 = acx * cpx + acy * cpy + acz * cpz
    if d6 >= 0.0 and d5 <= d6:
        return cx, cy, cz
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        w = d2 / (d2 - d6)
        return ax + w * acx, ay + w * acy, az + w * acz
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return (bx + w * (cx - bx), by + w * (cy - by), bz + w * (cz - bz))
    denom = 1.0 / (va + vb + vc)
    v = vb * denom
    w = vc * denom
    return (ax + abx * v + acx * w, ay + aby * v + acy * w, az + abz * v + acz * w)


@njit(parallel=True, cache=True)
def exact_point_mesh(points, d_init, verts, tris, starts, ids, mins, cell, gdims):
    """Exact distance from each point to the mesh, given per-point upper bounds.

    d_init must be a valid upper bound on the true distance (e.g. the distance
    to the nearest mesh vertex). Returns (distances, closest triangle index,
    closest points).
    """
    n = points.shape[0]
    dist = np.empty(n, np.float64)
    tri_idx = np.empty(n, np.int64)
    qpts = np.empty((n, 3), np.float64)
    nyz = gdims[1] * gdims[2]
    for m in prange(n):
        px = float(points[m, 0])
        py = float(points[m, 1])
        pz = float(points[m, 2])
        best = float(d_init[m]) * 1.0000001 + 1e-9
        best_d2 = best * best
        best_t = -1
        bqx = px
        bqy = py
        bqz = pz
        ci = int(math.floor((px - mins[0]) / cell))
        cj = int(math.floor((py - mins[1]) / cell))
        ck = int(math.floor((pz - mins[2]) / cell))
        rc = int(math.ceil(best / cell)) + 1
        for dx in range(-rc, rc + 1):
            gx = ci + dx
            if gx < 0 or gx >= gdims[0]:
                continue
            lbx = max(0.0, max(mins[0] + gx * cell - px, px - (mins[0] + (gx + 1) * cell)))
            for dy in range(-rc, rc + 1):
                gy = cj + dy
                if gy < 0 or gy >= gdims[1]:
                    continue
                lby = max(0.0, max(mins[1] + gy * cell - py, py - (mins[1] + (gy + 1) * cell)))
                for dz in range(-rc, rc + 1):
                    gz = ck + dz
                    if gz < 0 or gz >= gdims[2]:
                        continue
                    lbz = max(0.0, max(mins[2] + gz * cell - pz, pz - (mins[2] + (gz + 1) * cell)))
                    if lbx * lbx + lby * lby + lbz * lbz > best_d2:
                        continue
                    c = gx * nyz + gy * gdims[2] + gz
                    for e in range(starts[c], starts[c + 1]):
                        t = ids[e]
                        a = tris[t, 0]
                        b = tris[t, 1]
                        cc = tris[t, 2]
                        qx, qy, qz = _closest_point_tri(
                            float(verts[a, 0]), float(verts[a, 1]), float(verts[a, 2]),
                            float(verts[b, 0]), float(verts[b, 1]), float(verts[b, 2]),
                            float(verts[cc, 0]), float(verts[cc, 1]), float(verts[cc, 2]),
                            px, py, pz)
                        d2 = (qx - px) ** 2 + (qy - py) ** 2 + (qz - pz) ** 2
                        if d2 < best_d2:
                            best_d2 = d2
                            best_t = t
                            bqx = qx
                            bqy = qy
                            bqz = qz
        dist[m] = math.sqrt(best_d2) if best_t >= 0 else float(d_init[m])
        tri_idx[m] = best_t
        qpts[m, 0] = bqx
        qpts[m, 1] = bqy
        qpts[m, 2] = bqz
    return dist, tri_idx, qpts


@njit(cache=True)
def _seg_tri_hit(ax, ay, az, bx, by, bz, cx, cy, cz, ox, oy, oz, dx, dy, dz, t_lo, t_hi):
    """Moller-Trumbore segment/triangle test with t restricted to (t_lo, t_hi)."""
    e1x, e1y, e1z = bx - ax, by - ay, bz - az
    e2x, e2y, e2z = cx - ax, cy - ay, cz - az
    px = dy * e2z - dz * e2y
    py = dz * e2x - dx * e2z
    pz = dx * e2y - dy * e2x
    det = e1x * px + e1y * py + e1z * pz
    if abs(det) < 1e-12:
        return False
    inv = 1.0 / det
    tx, ty, tz = ox - ax, oy - ay, oz - az
    u = (tx * px + ty * py + tz * pz) * inv
    if u < 0.0 or u > 1.0:
        return False
    qx = ty * e1z - tz * e1y
    qy = tz * e1x - tx * e1z
    qz = tx * e1y - ty * e1x
    v = (dx * qx + dy * qy + dz * qz) * inv
    if v < 0.0 or u + v > 1.0:
        return False
    t = (e2x * qx + e2y * qy + e2z * qz) * inv
    return t_lo < t < t_hi


@njit(cache=True)
def _segment_hits(ox, oy, oz, ex, ey, ez, verts, tris, starts, ids, mins, cell, gdims):
    """Does the open segment (origin -> end) intersect any triangle?

    Walks the triangle grid with a 3D DDA so every pierced cell is visited.
    """
    dx = ex - ox
    dy = ey - oy
    dz = ez - oz
    # Clip the segment parameter range to the (slightly inflated) grid box.
    t0 = 0.0
    t1 = 1.0
    for ax in range(3):
        o = (ox, oy, oz)[ax]
        d = (dx, dy, dz)[ax]
        lo = mins[ax] - 0.5 * cell
        hi = mins[ax] + (gdims[ax] + 0.5) * cell
        if abs(d) < 1e-15:
            if o < lo or o > hi:
                return False
        else:
            ta = (lo - o) / d
            tb = (hi - o) / d
            if ta > tb:
                ta, tb = tb, ta
            t0 = max(t0, ta)
            t1 = min(t1, tb)
    if t0 > t1:
        return False
    sx = ox + t0 * dx
    sy = oy + t0 * dy
    sz = oz + t0 * dz
    ci = max(0, min(gdims[0] - 1, int(math.floor((sx - mins[0]) / cell))))
    cj = max(0, min(gdims[1] - 1, int(math.floor((sy - mins[1]) / cell))))
    ck = max(0, min(gdims[2] - 1, int(math.floor((sz - mins[2]) / cell))))
    stepx = 1 if dx > 0 else -1
    stepy = 1 if dy > 0 else -1
    stepz = 1 if dz > 0 else -1
    big = 1e30
    tmaxx = ((mins[0] + (ci + (stepx > 0)) * cell) - ox) / dx if dx != 0 else big
    tmaxy = ((mins[1] + (cj + (stepy > 0)) * cell) - oy) / dy if dy != 0 else big
    tmaxz = ((mins[2] + (ck + (stepz > 0)) * cell) - oz) / dz if dz != 0 else big
    tdx = abs(cell / dx) if dx != 0 else big
    tdy = abs(cell / dy) if dy != 0 else big
    tdz = abs(cell / dz) if dz != 0 else big
    nyz = gdims[1] * gdims[2]
    t_lo = 1e-9
    t_hi = 1.0 - 1e-12
    while True:
        if 0 <= ci < gdims[0] and 0 <= cj < gdims[1] and 0 <= ck < gdims[2]:
            c = ci * nyz + cj * gdims[2] + ck
            for e in range(starts[c], starts[c + 1]):
                t = ids[e]
                a = tris[t, 0]
                b = tris[t, 1]
                cc = tris[t, 2]
                if _seg_tri_hit(
                        float(verts[a, 0]), float(verts[a, 1]), float(verts[a, 2]),
                        float(verts[b, 0]), float(verts[b, 1]), float(verts[b, 2]),
                        float(verts[cc, 0]), float(verts[cc, 1]), float(verts[cc, 2]),
                        ox, oy, oz, dx, dy, dz, t_lo, t_hi):
                    return True
        tnext = min(tmaxx, min(tmaxy, tmaxz))
        if tnext > t1 + 1e-12:
            return False
        if tmaxx <= tmaxy and tmaxx <= tmaxz:
            ci += stepx
            tmaxx += tdx
            if ci < 0 or ci >= gdims[0]:
                return False
        elif tmaxy <= tmaxz:
            cj += stepy
            tmaxy += tdy
            if cj < 0 or cj >= gdims[1]:
                return False
        else:
            ck += stepz
            tmaxz += tdz
            if ck < 0 or ck >= gdims[2]:
                return False


@njit(parallel=True, cache=True)
def visibility_mask(points, origin, eps, verts, tris, starts, ids, mins, cell, gdims):
    """For each point: 1 if the open segment origin -> (point - eps toward origin)
    intersects no triangle, else 0."""
    n = points.shape[0]
    out = np.zeros(n, np.uint8)
    ox = float(origin[0])
    oy = float(origin[1])
    oz = float(origin[2])
    for m in prange(n):
        px = float(points[m, 0])
        py = float(points[m, 1])
        pz = float(points[m, 2])
        vx = px - ox
        vy = py - oy
        vz = pz - oz
        norm = math.sqrt(vx * vx + vy * vy + vz * vz)
        if norm <= eps:
            out[m] = 1  # point effectively at the origin: nothing to occlude
            continue
        f = (norm - eps) / norm
        ex = ox + vx * f
        ey = oy + vy * f
        ez = oz + vz * f
        if not _segment_hits(ox, oy, oz, ex, ey, ez, verts, tris, starts, ids, mins, cell, gdims):
            out[m] = 1
    return out
