"""Pinhole camera and CPU raycaster: depth, instance masks, flat RGB.

Rays go through pixel centers; depth is Euclidean distance along the ray
(infinity on miss) and the mask carries the hit triangle's instance id
(0 for structure or miss). Rendering is pure and deterministic, so
concurrent renders over one shared scene are safe.
"""

from __future__ import annotations

import dataclasses
import math
import weakref

import numpy as np

from navforge import _kernels
from navforge.scene import Scene

GOAL_RESOLUTION = 512  # goal images are square 512x512

_WORLD_UP = np.array([0.0, 1.0, 0.0])


@dataclasses.dataclass(frozen=True, eq=False)
class GoalCamera:
    """Pinhole camera pose + intrinsics, independent of any agent."""

    position: np.ndarray  # (3,) meters
    yaw: float  # radians, 0 faces +x, increases toward +z
    pitch: float  # radians, positive looks up
    hfov: float  # radians
    width: int = GOAL_RESOLUTION
    height: int = GOAL_RESOLUTION

    def __post_init__(self):
        object.__setattr__(
            self, "position", np.asarray(self.position, dtype=np.float64)
        )
        if not 0.0 < self.hfov < math.pi:
            raise ValueError(f"hfov must be in (0, pi), got {self.hfov}")
        if self.width < 1 or self.height < 1:
            raise ValueError("resolution must be >= 1 pixel")

    @property
    def vfov(self) -> float:
        # Square pixels: the vertical FOV follows from hfov and aspect.
        return 2.0 * math.atan(math.tan(self.hfov / 2.0) * self.height / self.width)

    def basis(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(forward, right, up) unit vectors of the camera frame."""
        cp = math.cos(self.pitch)
        forward = np.array(
            [cp * math.cos(self.yaw), math.sin(self.pitch), cp * math.sin(self.yaw)]
        )
        right = np.cross(forward, _WORLD_UP)
        norm = np.linalg.norm(right)
        if norm < 1e-12:  # straight up/down: pick a right vector from yaw alone
            right = np.array([-math.sin(self.yaw), 0.0, math.cos(self.yaw)])
        else:
            right = right / norm
        up = np.cross(right, forward)
        return forward, right, up

    def ray_directions(self) -> np.ndarray:
        """(height, width, 3) unit ray directions through pixel centers."""
        forward, right, up = self.basis()
        tan_h = math.tan(self.hfov / 2.0)
        tan_v = tan_h * self.height / self.width
        u = (2.0 * (np.arange(self.width) + 0.5) / self.width - 1.0) * tan_h
        v = (1.0 - 2.0 * (np.arange(self.height) + 0.5) / self.height) * tan_v
        dirs = (
            forward[None, None, :]
            + u[None, :, None] * right[None, None, :]
            + v[:, None, None] * up[None, None, :]
        )
        dirs /= np.linalg.norm(dirs, axis=2, keepdims=True)
        return dirs

    def project(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """World points -> (pixel columns, rows) floats, plus in-front mask.

        Integer coordinates land on pixel centers; callers decide what to do
        with points outside the frame.
        """
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        forward, right, up = self.basis()
        rel = points - self.position
        x = rel @ right
        y = rel @ up
        z = rel @ forward
        in_front = z > 1e-12
        tan_h = math.tan(self.hfov / 2.0)
        tan_v = tan_h * self.height / self.width
        with np.errstate(divide="ignore", invalid="ignore"):
            u = (x / z / tan_h + 1.0) * self.width / 2.0 - 0.5
            v = (1.0 - y / z / tan_v) * self.height / 2.0 - 0.5
        return np.stack([u, v], axis=1), in_front


@dataclasses.dataclass(frozen=True, eq=False)
class Render:
    """Per-pixel nearest-hit result: depth in meters, instance-id mask."""

    depth: np.ndarray  # (H, W) float32, inf = miss
    instance_mask: np.ndarray  # (H, W) int32, 0 = structure or miss

    @property
    def height(self) -> int:
        return self.depth.shape[0]

    @property
    def width(self) -> int:
        return self.depth.shape[1]


# ---------------------------------------------------------------------------
# BVH acceleration structure
# ---------------------------------------------------------------------------

_LEAF_SIZE = 4


@dataclasses.dataclass(frozen=True, eq=False)
class TriangleBVH:
    node_min: np.ndarray  # (K, 3) float64
    node_max: np.ndarray
    node_a: np.ndarray  # inner: left child; leaf: triangle start
    node_b: np.ndarray  # inner: right child; leaf: triangle count
    node_leaf: np.ndarray  # (K,) uint8
    v0: np.ndarray  # (M, 3) reordered triangle data
    e1: np.ndarray
    e2: np.ndarray
    normal_y: np.ndarray  # (M,) unit normal y component (winding order)
    tri_index: np.ndarray  # (M,) reordered position -> original triangle index

    def kernel_args(self):
        return (
            self.node_min, self.node_max, self.node_a, self.node_b,
            self.node_leaf, self.v0, self.e1, self.e2,
        )


def build_bvh(scene: Scene) -> TriangleBVH:
    """Median-split BVH over triangle centroid boxes."""
    verts = scene.vertices
    tris = scene.triangles
    a = verts[tris[:, 0]]
    b = verts[tris[:, 1]]
    c = verts[tris[:, 2]]
    tri_min = np.minimum(np.minimum(a, b), c)
    tri_max = np.maximum(np.maximum(a, b), c)
    centers = 0.5 * (tri_min + tri_max)

    node_min: list[np.ndarray] = []
    node_max: list[np.ndarray] = []
    node_a: list[int] = []
    node_b: list[int] = []
    node_leaf: list[int] = []
    order: list[np.ndarray] = []
    count = [0]

    def emit(idx: np.ndarray) -> int:
        node = len(node_a)
        node_min.append(tri_min[idx].min(axis=0))
        node_max.append(tri_max[idx].max(axis=0))
        node_a.append(0)
        node_b.append(0)
        node_leaf.append(0)
        if len(idx) <= _LEAF_SIZE:
            node_leaf[node] = 1
            node_a[node] = count[0]
            node_b[node] = len(idx)
            count[0] += len(idx)
            order.append(idx)
            return node
        extent = tri_max[idx].max(axis=0) - tri_min[idx].min(axis=0)
        axis = int(np.argmax(extent))
        mid = len(idx) // 2
        part = idx[np.argsort(centers[idx, axis], kind="stable")]
        node_a[node] = emit(part[:mid])
        node_b[node] = emit(part[mid:])
        return node

    emit(np.arange(len(tris), dtype=np.int64))
    tri_index = np.concatenate(order).astype(np.int32)
    v0 = np.ascontiguousarray(a[tri_index])
    e1 = np.ascontiguousarray(b[tri_index] - a[tri_index])
    e2 = np.ascontiguousarray(c[tri_index] - a[tri_index])
    normals = np.cross(e1, e2)
    lengths = np.linalg.norm(normals, axis=1)
    normal_y = np.where(lengths > 0, normals[:, 1] / np.maximum(lengths, 1e-300), 0.0)
    return TriangleBVH(
        node_min=np.ascontiguousarray(np.array(node_min)),
        node_max=np.ascontiguousarray(np.array(node_max)),
        node_a=np.array(node_a, dtype=np.int32),
        node_b=np.array(node_b, dtype=np.int32),
        node_leaf=np.array(node_leaf, dtype=np.uint8),
        v0=v0,
        e1=e1,
        e2=e2,
        normal_y=np.ascontiguousarray(normal_y),
        tri_index=tri_index,
    )


_bvh_cache: "weakref.WeakKeyDictionary[Scene, TriangleBVH]" = weakref.WeakKeyDictionary()


def scene_bvh(scene: Scene) -> TriangleBVH:
    bvh = _bvh_cache.get(scene)
    if bvh is None:
        bvh = build_bvh(scene)
        _bvh_cache[scene] = bvh
    return bvh


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def render(scene: Scene, camera: GoalCamera) -> Render:
    """Raycast the scene through the camera; an all-miss render is valid."""
    bvh = scene_bvh(scene)
    dirs = camera.ray_directions().reshape(-1, 3)
    t, tri = _kernels.raycast_from_point(
        np.ascontiguousarray(camera.position), np.ascontiguousarray(dirs),
        *bvh.kernel_args(),
    )
    hit = tri >= 0
    mask = np.zeros(len(t), dtype=np.int32)
    mask[hit] = scene.triangle_instance[bvh.tri_index[tri[hit]]]
    return Render(
        depth=t.astype(np.float32).reshape(camera.height, camera.width),
        instance_mask=mask.reshape(camera.height, camera.width),
    )


def unproject(rendered: Render, camera: GoalCamera, instance_id: int) -> np.ndarray:
    """World-space points for every pixel whose mask equals ``instance_id``.

    Points come back in row-major pixel order; an empty (0, 3) cloud is a
    valid result.
    """
    sel = rendered.instance_mask == instance_id
    if not sel.any():
        return np.empty((0, 3), dtype=np.float64)
    dirs = camera.ray_directions()[sel]
    depth = rendered.depth[sel].astype(np.float64)
    return camera.position + dirs * depth[:, None]


LOS_EPS = 1e-4  # endpoint tolerance in meters


def line_of_sight(scene: Scene, start: np.ndarray, end: np.ndarray) -> bool:
    """True iff the open segment (start, end) crosses no triangle."""
    bvh = scene_bvh(scene)
    starts = np.asarray(start, dtype=np.float64).reshape(1, 3)
    ends = np.asarray(end, dtype=np.float64).reshape(1, 3)
    blocked = _kernels.segments_blocked(
        np.ascontiguousarray(starts), np.ascontiguousarray(ends), LOS_EPS,
        *bvh.kernel_args(),
    )
    return not bool(blocked[0])


def segments_clear(scene: Scene, starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
    """Vectorized line_of_sight over paired rows of starts/ends."""
    bvh = scene_bvh(scene)
    blocked = _kernels.segments_blocked(
        np.ascontiguousarray(np.asarray(starts, dtype=np.float64)),
        np.ascontiguousarray(np.asarray(ends, dtype=np.float64)),
        LOS_EPS,
        *bvh.kernel_args(),
    )
    return blocked == 0


def support_heights(
    scene: Scene, xz: np.ndarray, *, min_normal_y: float = 0.7
) -> np.ndarray:
    """Per (x, z) column: lowest up-facing surface height, NaN without one."""
    bvh = scene_bvh(scene)
    xz = np.ascontiguousarray(np.atleast_2d(np.asarray(xz, dtype=np.float64)))
    y_top = float(scene.bounds_max[1]) + 1.0
    return _kernels.lowest_upward_hits(
        xz, y_top, min_normal_y, *bvh.kernel_args(), bvh.normal_y
    )


def points_near_geometry(scene: Scene, points: np.ndarray, radius: float) -> np.ndarray:
    """Boolean per point: some triangle lies within ``radius`` meters."""
    bvh = scene_bvh(scene)
    points = np.ascontiguousarray(np.atleast_2d(np.asarray(points, dtype=np.float64)))
    return (
        _kernels.points_near_mesh(points, bvh.v0, bvh.e1, bvh.e2, radius) == 1
    )


def instance_color(instance_id: int) -> tuple[int, int, int]:
    """Stable pseudo-color for an instance id (0 renders light gray)."""
    if instance_id == 0:
        return (200, 200, 200)
    h = (instance_id * 2654435761) & 0xFFFFFFFF  # Knuth multiplicative hash
    r = 64 + (h & 0x7F)
    g = 64 + ((h >> 8) & 0x7F)
    b = 64 + ((h >> 16) & 0x7F)
    return (int(r), int(g), int(b))


def shade(rendered: Render) -> np.ndarray:
    """Flat per-instance RGB (uint8); misses are black."""
    rgb = np.zeros((rendered.height, rendered.width, 3), dtype=np.uint8)
    hit = np.isfinite(rendered.depth)
    ids = np.unique(rendered.instance_mask[hit])
    for iid in ids:
        sel = hit & (rendered.instance_mask == iid)
        rgb[sel] = instance_color(int(iid))
    return rgb
