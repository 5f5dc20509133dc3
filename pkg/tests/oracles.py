"""Independent brute-force oracles used to cross-check the library.

Each oracle reimplements a quantity from scratch with a different
algorithm (facet enumeration, exhaustive loops, heapq Dijkstra, analytic
intersections) and deliberately avoids the library's BVH/qhull/scipy code
paths.
"""

from __future__ import annotations

import heapq
import math
from itertools import combinations

import numpy as np


# ---------------------------------------------------------------------------
# Convex hull area by facet enumeration over point triples
# ---------------------------------------------------------------------------


def _monotone_chain_area(points_2d: np.ndarray) -> float:
    """Area of the 2D convex hull (shoelace over a monotone-chain hull)."""
    pts = np.unique(np.round(points_2d, 12), axis=0)
    if len(pts) < 3:
        return 0.0
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def half(iterable):
        out = []
        for p in iterable:
            while len(out) >= 2 and np.cross(out[-1] - out[-2], p - out[-2]) <= 0:
                out.pop()
            out.append(p)
        return out

    lower = half(list(pts))
    upper = half(list(pts[::-1]))
    hull = np.array(lower[:-1] + upper[:-1])
    if len(hull) < 3:
        return 0.0
    x, y = hull[:, 0], hull[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, 1)) - np.dot(y, np.roll(x, 1))))


def _plane_basis(normal: np.ndarray) -> np.ndarray:
    pick = np.eye(3)[np.argmin(np.abs(normal))]
    u = np.cross(normal, pick)
    u /= np.linalg.norm(u)
    v = np.cross(normal, u)
    return np.stack([u, v])


def brute_hull_area(points: np.ndarray, eps: float = 1e-9) -> float:
    """Hull surface area via supporting-plane enumeration over all triples.

    Fully coplanar clouds return both faces (twice the planar hull area),
    matching the degenerate-cloud convention.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    n = len(pts)
    if n < 3:
        return 0.0
    scale = max(float(np.abs(pts).max()), 1.0)
    tol = eps * scale

    centered = pts - pts.mean(axis=0)
    _, singular, basis = np.linalg.svd(centered, full_matrices=False)
    if singular[-1] <= 1e-9 * max(singular[0], 1e-30):
        if len(singular) < 2 or singular[1] <= 1e-9 * max(singular[0], 1e-30):
            return 0.0
        return 2.0 * _monotone_chain_area(centered @ basis[:2].T)

    triples = np.array(list(combinations(range(n), 3)))
    a = pts[triples[:, 0]]
    normals = np.cross(pts[triples[:, 1]] - a, pts[triples[:, 2]] - a)
    lengths = np.linalg.norm(normals, axis=1)
    valid = lengths > tol
    triples, a, normals = triples[valid], a[valid], normals[valid] / lengths[valid, None]

    # Signed distance of every point to every candidate plane.
    d = np.einsum("tk,tnk->tn", normals, pts[None, :, :] - a[:, None, :])
    facet = ~((d > tol).any(axis=1) & (d < -tol).any(axis=1))

    area = 0.0
    seen = set()
    for t in np.flatnonzero(facet):
        normal = normals[t]
        if (d[t] > tol).any():
            normal = -normal
        flip = np.sign(normal[np.argmax(np.abs(normal))])
        key = tuple(np.round(normal * flip, 7)) + (
            round(float(normal @ a[t]) * flip, 7),
        )
        if key in seen:
            continue
        seen.add(key)
        on_plane = np.abs(d[t]) <= tol
        flat = (pts[on_plane] - a[t]) @ _plane_basis(normal).T
        area += _monotone_chain_area(flat)
    return area


# ---------------------------------------------------------------------------
# Segment vs mesh, ray vs plane/box: straight-line algebra over all triangles
# ---------------------------------------------------------------------------


def brute_segment_blocked(scene, start, end, eps: float = 1e-4) -> bool:
    """Exhaustive segment-triangle intersection over the whole mesh."""
    start = np.asarray(start, dtype=np.float64)
    end = np.asarray(end, dtype=np.float64)
    direction = end - start
    length = float(np.linalg.norm(direction))
    if length <= 2 * eps:
        return False
    v = scene.vertices
    tri = scene.triangles
    a = v[tri[:, 0]]
    e1 = v[tri[:, 1]] - a
    e2 = v[tri[:, 2]] - a
    pvec = np.cross(np.broadcast_to(direction, e2.shape), e2)
    det = np.einsum("ij,ij->i", e1, pvec)
    ok = np.abs(det) > 1e-12
    inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    tvec = start - a
    u = np.einsum("ij,ij->i", tvec, pvec) * inv
    qvec = np.cross(tvec, e1)
    vv = np.einsum("j,ij->i", direction, qvec) * inv
    t = np.einsum("ij,ij->i", e2, qvec) * inv
    inside = ok & (u >= -1e-9) & (vv >= -1e-9) & (u + vv <= 1 + 1e-9)
    t_lo = eps / length
    t_hi = 1.0 - eps / length
    return bool((inside & (t > t_lo) & (t < t_hi)).any())


def analytic_ray_box(origins: np.ndarray, dirs: np.ndarray, lo, hi):
    """Slab-method ray-box entry distances: (hit mask, t)."""
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs
        t0 = (lo - origins) * inv
        t1 = (hi - origins) * inv
    tmin = np.nanmax(np.minimum(t0, t1), axis=-1)
    tmax = np.nanmin(np.maximum(t0, t1), axis=-1)
    hit = (tmin <= tmax) & (tmax > 0)
    return hit, np.where(tmin > 0, tmin, tmax)


def analytic_ray_plane(origins: np.ndarray, dirs: np.ndarray, axis: int, value: float):
    """Distance along each ray to the plane coord[axis] == value."""
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (value - origins[..., axis]) / dirs[..., axis]
    return t


# ---------------------------------------------------------------------------
# Occupancy by exhaustive per-cell collision on raw triangle data
# ---------------------------------------------------------------------------


def _down_hit_y(scene, x: float, z: float, min_normal_y: float = 0.7):
    """Lowest up-facing surface under (x, +inf, z), via plain plane algebra."""
    v = scene.vertices
    tri = scene.triangles
    a, b, c = v[tri[:, 0]], v[tri[:, 1]], v[tri[:, 2]]
    n = np.cross(b - a, c - a)
    lens = np.linalg.norm(n, axis=1)
    ok = lens > 1e-300
    up = np.where(ok, n[:, 1] / np.maximum(lens, 1e-300), 0.0) >= min_normal_y
    # point-in-triangle in the XZ plane via barycentric coordinates
    p = np.array([x, z])
    a2, b2, c2 = a[:, [0, 2]], b[:, [0, 2]], c[:, [0, 2]]
    v0 = c2 - a2
    v1 = b2 - a2
    v2 = p - a2
    den = v0[:, 0] * v1[:, 1] - v1[:, 0] * v0[:, 1]
    nz = np.abs(den) > 1e-14
    den = np.where(nz, den, 1.0)
    wu = (v2[:, 0] * v1[:, 1] - v1[:, 0] * v2[:, 1]) / den
    wv = (v0[:, 0] * v2[:, 1] - v2[:, 0] * v0[:, 1]) / den
    inside = nz & (wu >= -1e-12) & (wv >= -1e-12) & (wu + wv <= 1 + 1e-12)
    cand = inside & up
    if not cand.any():
        return None
    ys = (
        a[cand, 1]
        + wu[cand] * (c[cand, 1] - a[cand, 1])
        + wv[cand] * (b[cand, 1] - a[cand, 1])
    )
    return float(ys.min())


def _dist_point_segment_2d(p, a, b) -> float:
    ab = b - a
    denom = float(ab @ ab)
    t = 0.0 if denom == 0 else max(0.0, min(1.0, float((p - a) @ ab) / denom))
    return float(np.linalg.norm(p - (a + t * ab)))


def _dist_point_triangle_2d(p, tri2) -> float:
    d = min(
        _dist_point_segment_2d(p, tri2[0], tri2[1]),
        _dist_point_segment_2d(p, tri2[1], tri2[2]),
        _dist_point_segment_2d(p, tri2[2], tri2[0]),
    )
    s1 = np.cross(tri2[1] - tri2[0], p - tri2[0])
    s2 = np.cross(tri2[2] - tri2[1], p - tri2[1])
    s3 = np.cross(tri2[0] - tri2[2], p - tri2[2])
    if abs(np.cross(tri2[1] - tri2[0], tri2[2] - tri2[0])) > 1e-12:
        if (s1 >= 0 and s2 >= 0 and s3 >= 0) or (s1 <= 0 and s2 <= 0 and s3 <= 0):
            return 0.0
    return d


def brute_cell_free(scene, body, center_xz, step_clearance: float = 0.02):
    """Exhaustive cylinder test for one cell center: (free, floor_y)."""
    floor = _down_hit_y(scene, center_xz[0], center_xz[1])
    if floor is None:
        return False, math.nan
    v = scene.vertices
    tri = scene.triangles
    p = np.asarray(center_xz, dtype=np.float64)
    for m in range(len(tri)):
        corners = v[tri[m]]
        y_lo, y_hi = corners[:, 1].min(), corners[:, 1].max()
        if not (y_hi > floor + step_clearance and y_lo < floor + body.height):
            continue
        if _dist_point_triangle_2d(p, corners[:, [0, 2]]) <= body.radius:
            return False, floor
    return True, floor


# ---------------------------------------------------------------------------
# Independent grid Dijkstra (heapq), same connectivity rules
# ---------------------------------------------------------------------------


def heapq_dijkstra(
    free: np.ndarray, cell_size: float, start: tuple[int, int], goal: tuple[int, int]
) -> float:
    """8-connected shortest path over a boolean grid, diagonal corner rule
    included; plain heapq implementation independent of scipy."""
    if not (free[start] and free[goal]):
        return math.inf
    nx, nz = free.shape
    dist = {start: 0.0}
    heap = [(0.0, start)]
    moves = [
        (1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0),
        (1, 1, math.sqrt(2)), (1, -1, math.sqrt(2)),
        (-1, 1, math.sqrt(2)), (-1, -1, math.sqrt(2)),
    ]
    visited = set()
    while heap:
        d, cell = heapq.heappop(heap)
        if cell == goal:
            return d
        if cell in visited:
            continue
        visited.add(cell)
        i, j = cell
        for di, dj, w in moves:
            ni, nj = i + di, j + dj
            if not (0 <= ni < nx and 0 <= nj < nz and free[ni, nj]):
                continue
            if di != 0 and dj != 0 and not (free[ni, j] and free[i, nj]):
                continue
            nd = d + w * cell_size
            if nd < dist.get((ni, nj), math.inf):
                dist[(ni, nj)] = nd
                heapq.heappush(heap, (nd, (ni, nj)))
    return math.inf
