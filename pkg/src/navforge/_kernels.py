"""Numba kernels for BVH raycasting and point/triangle queries.

All kernels operate on flattened BVH arrays (see render.TriangleBVH) and
write one output slot per query, so parallel loops stay deterministic.
Scalar-component style avoids per-ray allocations.
"""

from __future__ import annotations

import numba
import numpy as np
from numba import njit, prange

STACK_DEPTH = 128
T_MIN = 1e-7  # self-intersection guard for nearest-hit queries
_EDGE_EPS = 1e-9  # barycentric slack so shared edges do not leave cracks
_DET_EPS = 1e-12


@njit(cache=True, inline="always")
def _safe_inv(d):
    # Sign-preserving huge inverse for near-zero components keeps the slab
    # test branchless without NaNs (0 * 1e300 == 0, never 0 * inf).
    if d > 1e-300 or d < -1e-300:
        return 1.0 / d
    return np.copysign(1e300, d)


@njit(cache=True, inline="always")
def _ray_box_enter(
    ox, oy, oz, ix, iy, iz, bminx, bminy, bminz, bmaxx, bmaxy, bmaxz, tmax
):
    """Entry parameter of ray vs box, or inf when the box is missed."""
    t0 = (bminx - ox) * ix
    t1 = (bmaxx - ox) * ix
    tlo = min(t0, t1)
    thi = max(t0, t1)
    t0 = (bminy - oy) * iy
    t1 = (bmaxy - oy) * iy
    tlo = max(tlo, min(t0, t1))
    thi = min(thi, max(t0, t1))
    t0 = (bminz - oz) * iz
    t1 = (bmaxz - oz) * iz
    tlo = max(tlo, min(t0, t1))
    thi = min(thi, max(t0, t1))
    if tlo > thi or thi < 0.0 or tlo > tmax:
        return np.inf
    return max(tlo, 0.0)


@njit(cache=True, inline="always")
def _ray_box(ox, oy, oz, dx, dy, dz, bminx, bminy, bminz, bmaxx, bmaxy, bmaxz, tmax):
    ix = _safe_inv(dx)
    iy = _safe_inv(dy)
    iz = _safe_inv(dz)
    return (
        _ray_box_enter(
            ox, oy, oz, ix, iy, iz, bminx, bminy, bminz, bmaxx, bmaxy, bmaxz, tmax
        )
        != np.inf
    )


@njit(cache=True, inline="always")
def _ray_triangle(ox, oy, oz, dx, dy, dz, ax, ay, az, e1x, e1y, e1z, e2x, e2y, e2z):
    """Moller-Trumbore; returns hit parameter t or -1.0."""
    px = dy * e2z - dz * e2y
    py = dz * e2x - dx * e2z
    pz = dx * e2y - dy * e2x
    det = e1x * px + e1y * py + e1z * pz
    if -_DET_EPS < det < _DET_EPS:
        return -1.0
    inv = 1.0 / det
    tx = ox - ax
    ty = oy - ay
    tz = oz - az
    u = (tx * px + ty * py + tz * pz) * inv
    if u < -_EDGE_EPS or u > 1.0 + _EDGE_EPS:
        return -1.0
    qx = ty * e1z - tz * e1y
    qy = tz * e1x - tx * e1z
    qz = tx * e1y - ty * e1x
    v = (dx * qx + dy * qy + dz * qz) * inv
    if v < -_EDGE_EPS or u + v > 1.0 + _EDGE_EPS:
        return -1.0
    return (e2x * qx + e2y * qy + e2z * qz) * inv


@njit(cache=True, inline="always")
def _node_enter(ox, oy, oz, ix, iy, iz, node_min, node_max, node, tmax):
    return _ray_box_enter(
        ox, oy, oz, ix, iy, iz,
        node_min[node, 0], node_min[node, 1], node_min[node, 2],
        node_max[node, 0], node_max[node, 1], node_max[node, 2],
        tmax,
    )


@njit(cache=True, inline="always")
def _nearest_hit(
    ox, oy, oz, dx, dy, dz, tmax, stack,
    node_min, node_max, node_a, node_b, node_leaf, v0, e1, e2,
):
    ix = _safe_inv(dx)
    iy = _safe_inv(dy)
    iz = _safe_inv(dz)
    best_t = tmax
    best_tri = -1
    if _node_enter(ox, oy, oz, ix, iy, iz, node_min, node_max, 0, best_t) == np.inf:
        return np.inf, -1
    stack[0] = 0
    top = 1
    while top > 0:
        top -= 1
        node = stack[top]
        if node_leaf[node]:
            start = node_a[node]
            end = start + node_b[node]
            for tri in range(start, end):
                t = _ray_triangle(
                    ox, oy, oz, dx, dy, dz,
                    v0[tri, 0], v0[tri, 1], v0[tri, 2],
                    e1[tri, 0], e1[tri, 1], e1[tri, 2],
                    e2[tri, 0], e2[tri, 1], e2[tri, 2],
                )
                if T_MIN < t < best_t:
                    best_t = t
                    best_tri = tri
        else:
            # Visit the nearer child first so best_t prunes the farther one.
            a = node_a[node]
            b = node_b[node]
            ta = _node_enter(ox, oy, oz, ix, iy, iz, node_min, node_max, a, best_t)
            tb = _node_enter(ox, oy, oz, ix, iy, iz, node_min, node_max, b, best_t)
            if ta > tb:
                a, b = b, a
                ta, tb = tb, ta
            if tb != np.inf:
                stack[top] = b
                top += 1
            if ta != np.inf:
                stack[top] = a
                top += 1
    if best_tri < 0:
        return np.inf, -1
    return best_t, best_tri


_CHUNK = 4096  # rays per parallel work item; one traversal stack per chunk


@njit(cache=True, parallel=True)
def raycast_from_point(
    origin, dirs, node_min, node_max, node_a, node_b, node_leaf, v0, e1, e2
):
    """Nearest hit for N rays sharing one origin: (t, reordered tri index)."""
    n = dirs.shape[0]
    out_t = np.empty(n, dtype=np.float64)
    out_tri = np.empty(n, dtype=np.int32)
    n_chunks = (n + _CHUNK - 1) // _CHUNK
    for c in prange(n_chunks):
        stack = np.empty(STACK_DEPTH, dtype=np.int32)
        start = c * _CHUNK
        end = min(start + _CHUNK, n)
        for i in range(start, end):
            t, tri = _nearest_hit(
                origin[0], origin[1], origin[2],
                dirs[i, 0], dirs[i, 1], dirs[i, 2], np.inf, stack,
                node_min, node_max, node_a, node_b, node_leaf, v0, e1, e2,
            )
            out_t[i] = t
            out_tri[i] = tri
    return out_t, out_tri


@njit(cache=True, inline="always")
def _segment_blocked_one(
    ax_, ay_, az_, bx_, by_, bz_, eps, stack,
    node_min, node_max, node_a, node_b, node_leaf, v0, e1, e2,
):
    dx = bx_ - ax_
    dy = by_ - ay_
    dz = bz_ - az_
    length = np.sqrt(dx * dx + dy * dy + dz * dz)
    if length <= 2.0 * eps:
        return False
    t_lo = eps / length
    t_hi = 1.0 - eps / length
    stack[0] = 0
    top = 1
    while top > 0:
        top -= 1
        node = stack[top]
        if not _ray_box(
            ax_, ay_, az_, dx, dy, dz,
            node_min[node, 0], node_min[node, 1], node_min[node, 2],
            node_max[node, 0], node_max[node, 1], node_max[node, 2],
            1.0,
        ):
            continue
        if node_leaf[node]:
            start = node_a[node]
            end = start + node_b[node]
            for tri in range(start, end):
                t = _ray_triangle(
                    ax_, ay_, az_, dx, dy, dz,
                    v0[tri, 0], v0[tri, 1], v0[tri, 2],
                    e1[tri, 0], e1[tri, 1], e1[tri, 2],
                    e2[tri, 0], e2[tri, 1], e2[tri, 2],
                )
                if t_lo < t < t_hi:
                    return True
        else:
            stack[top] = node_a[node]
            stack[top + 1] = node_b[node]
            top += 2
    return False


@njit(cache=True, parallel=True)
def segments_blocked(
    starts, ends, eps, node_min, node_max, node_a, node_b, node_leaf, v0, e1, e2
):
    n = starts.shape[0]
    out = np.empty(n, dtype=np.uint8)
    n_chunks = (n + _CHUNK - 1) // _CHUNK
    for c in prange(n_chunks):
        stack = np.empty(STACK_DEPTH, dtype=np.int32)
        start = c * _CHUNK
        end = min(start + _CHUNK, n)
        for i in range(start, end):
            out[i] = _segment_blocked_one(
                starts[i, 0], starts[i, 1], starts[i, 2],
                ends[i, 0], ends[i, 1], ends[i, 2], eps, stack,
                node_min, node_max, node_a, node_b, node_leaf, v0, e1, e2,
            )
    return out


@njit(cache=True, inline="always")
def _lowest_upward_one(
    ox, oy, oz, min_normal_y, stack,
    node_min, node_max, node_a, node_b, node_leaf, v0, e1, e2, normal_y,
):
    best_t = -1.0
    stack[0] = 0
    top = 1
    while top > 0:
        top -= 1
        node = stack[top]
        if not _ray_box(
            ox, oy, oz, 0.0, -1.0, 0.0,
            node_min[node, 0], node_min[node, 1], node_min[node, 2],
            node_max[node, 0], node_max[node, 1], node_max[node, 2],
            np.inf,
        ):
            continue
        if node_leaf[node]:
            start = node_a[node]
            end = start + node_b[node]
            for tri in range(start, end):
                if normal_y[tri] < min_normal_y:
                    continue
                t = _ray_triangle(
                    ox, oy, oz, 0.0, -1.0, 0.0,
                    v0[tri, 0], v0[tri, 1], v0[tri, 2],
                    e1[tri, 0], e1[tri, 1], e1[tri, 2],
                    e2[tri, 0], e2[tri, 1], e2[tri, 2],
                )
                if t > 0.0 and t > best_t:
                    best_t = t
        else:
            stack[top] = node_a[node]
            stack[top + 1] = node_b[node]
            top += 2
    return oy - best_t if best_t > 0.0 else np.nan


@njit(cache=True, parallel=True)
def lowest_upward_hits(
    xz, y_top, min_normal_y,
    node_min, node_max, node_a, node_b, node_leaf, v0, e1, e2, normal_y,
):
    """For each (x, z): lowest y hit by a down ray on an up-facing triangle.

    Returns NaN where no up-facing surface lies below (x, y_top, z). Used
    for floor-support detection, so slopes steeper than min_normal_y are
    not support.
    """
    n = xz.shape[0]
    out = np.empty(n, dtype=np.float64)
    n_chunks = (n + _CHUNK - 1) // _CHUNK
    for c in prange(n_chunks):
        stack = np.empty(STACK_DEPTH, dtype=np.int32)
        start = c * _CHUNK
        end = min(start + _CHUNK, n)
        for i in range(start, end):
            out[i] = _lowest_upward_one(
                xz[i, 0], y_top, xz[i, 1], min_normal_y, stack,
                node_min, node_max, node_a, node_b, node_leaf, v0, e1, e2,
                normal_y,
            )
    return out


@njit(cache=True, inline="always")
def _point_triangle_dist_sq(px, py, pz, ax, ay, az, e1x, e1y, e1z, e2x, e2y, e2z):
    # Ericson's closest-point-on-triangle, squared distance.
    apx = px - ax
    apy = py - ay
    apz = pz - az
    d1 = e1x * apx + e1y * apy + e1z * apz
    d2 = e2x * apx + e2y * apy + e2z * apz
    if d1 <= 0.0 and d2 <= 0.0:
        return apx * apx + apy * apy + apz * apz
    bpx = apx - e1x
    bpy = apy - e1y
    bpz = apz - e1z
    d3 = e1x * bpx + e1y * bpy + e1z * bpz
    d4 = e2x * bpx + e2y * bpy + e2z * bpz
    if d3 >= 0.0 and d4 <= d3:
        return bpx * bpx + bpy * bpy + bpz * bpz
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        v = d1 / (d1 - d3)
        qx = apx - v * e1x
        qy = apy - v * e1y
        qz = apz - v * e1z
        return qx * qx + qy * qy + qz * qz
    cpx = apx - e2x
    cpy = apy - e2y
    cpz = apz - e2z
    d5 = e1x * cpx + e1y * cpy + e1z * cpz
    d6 = e2x * cpx + e2y * cpy + e2z * cpz
    if d6 >= 0.0 and d5 <= d6:
        return cpx * cpx + cpy * cpy + cpz * cpz
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        w = d2 / (d2 - d6)
        qx = apx - w * e2x
        qy = apy - w * e2y
        qz = apz - w * e2z
        return qx * qx + qy * qy + qz * qz
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and d4 - d3 >= 0.0 and d5 - d6 >= 0.0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        qx = bpx - w * (e2x - e1x)
        qy = bpy - w * (e2y - e1y)
        qz = bpz - w * (e2z - e1z)
        return qx * qx + qy * qy + qz * qz
    denom = 1.0 / (va + vb + vc)
    v = vb * denom
    w = vc * denom
    qx = apx - v * e1x - w * e2x
    qy = apy - v * e1y - w * e2y
    qz = apz - v * e1z - w * e2z
    return qx * qx + qy * qy + qz * qz


@njit(cache=True, parallel=True)
def points_near_mesh(points, v0, e1, e2, radius):
    """True per point when any triangle lies within ``radius`` (brute force)."""
    n = points.shape[0]
    m = v0.shape[0]
    r_sq = radius * radius
    out = np.zeros(n, dtype=np.uint8)
    for i in prange(n):
        px = points[i, 0]
        py = points[i, 1]
        pz = points[i, 2]
        for tri in range(m):
            d_sq = _point_triangle_dist_sq(
                px, py, pz,
                v0[tri, 0], v0[tri, 1], v0[tri, 2],
                e1[tri, 0], e1[tri, 1], e1[tri, 2],
                e2[tri, 0], e2[tri, 1], e2[tri, 2],
            )
            if d_sq <= r_sq:
                out[i] = 1
                break
    return out


@njit(cache=True)
def swept_segments_free(free, origin_x, origin_z, cell_size, starts, ends):
    """Grid DDA over paired 2D segments: 1 when every crossed cell is free.

    Mirrors the simulator's swept-cell walk exactly (same tie handling at
    corner crossings), so plans validated here replay identically.
    """
    n = starts.shape[0]
    nx, nz = free.shape
    out = np.zeros(n, dtype=np.uint8)
    for s in range(n):
        x0 = starts[s, 0]
        z0 = starts[s, 1]
        x1 = ends[s, 0]
        z1 = ends[s, 1]
        i = int(np.floor((x0 - origin_x) / cell_size))
        j = int(np.floor((z0 - origin_z) / cell_size))
        i1 = int(np.floor((x1 - origin_x) / cell_size))
        j1 = int(np.floor((z1 - origin_z) / cell_size))
        if i < 0 or i >= nx or j < 0 or j >= nz or i1 < 0 or i1 >= nx or j1 < 0 or j1 >= nz:
            continue
        if not free[i, j]:
            continue
        di = x1 - x0
        dj = z1 - z0
        step_i = 1 if di > 0 else -1
        step_j = 1 if dj > 0 else -1
        inv_i = abs(1.0 / di) if di != 0 else np.inf
        inv_j = abs(1.0 / dj) if dj != 0 else np.inf
        if di != 0:
            edge_i = origin_x + (i + (1 if step_i > 0 else 0)) * cell_size
            t_max_i = abs(edge_i - x0) * inv_i
        else:
            t_max_i = np.inf
        if dj != 0:
            edge_j = origin_z + (j + (1 if step_j > 0 else 0)) * cell_size
            t_max_j = abs(edge_j - z0) * inv_j
        else:
            t_max_j = np.inf
        dt_i = cell_size * inv_i
        dt_j = cell_size * inv_j
        ok = True
        guard = 0
        while i != i1 or j != j1:
            guard += 1
            if guard > 10000:
                ok = False
                break
            if abs(t_max_i - t_max_j) < 1e-12:
                # Corner crossing: both side cells must be free too.
                ii = i + step_i
                jj = j + step_j
                if not (0 <= ii < nx and 0 <= jj < nz):
                    ok = False
                    break
                if not (free[ii, j] and free[i, jj]):
                    ok = False
                    break
                i = ii
                j = jj
                t_max_i += dt_i
                t_max_j += dt_j
            elif t_max_i < t_max_j:
                i += step_i
                t_max_i += dt_i
            else:
                j += step_j
                t_max_j += dt_j
            if not (0 <= i < nx and 0 <= j < nz) or not free[i, j]:
                ok = False
                break
        out[s] = 1 if ok else 0
    return out
