"""Labeled triangle-mesh scenes: file I/O and a procedural room generator.

A scene is a triangle soup in meters (y-up, right-handed) where every
triangle carries an instance id. Id 0 marks unlabeled structure (walls,
floors); positive ids refer to entries of the instance table. Instance
centroids and bounding boxes are always derived from the labeled
geometry, never trusted from a file.
"""

from __future__ import annotations

import dataclasses
import io
import re
from pathlib import Path

import numpy as np

# Recommended closed vocabulary for furniture proxies. Other category
# strings are accepted; these are the ones the procedural generator emits.
CATEGORIES = ("chair", "bed", "toilet", "couch", "plant", "tv")

FORMAT_MAGIC = "forgescene"
FORMAT_VERSION = 1

_CATEGORY_RE = re.compile(r"^[A-Za-z0-9_\-]+$")


class SceneError(Exception):
    """Base error for scene loading, validation, and generation."""


class SceneParseError(SceneError):
    """The file does not conform to the scene format."""


class SceneValidationError(SceneError):
    """The parsed data violates a scene invariant."""


class SceneGenerationError(SceneError):
    """The procedural generator could not satisfy the request."""


@dataclasses.dataclass(frozen=True)
class ObjectInstance:
    """One labeled object: id, category, and geometry-derived summary."""

    id: int
    category: str
    centroid: np.ndarray  # (3,) area-weighted mean of triangle centroids
    aabb_min: np.ndarray  # (3,)
    aabb_max: np.ndarray  # (3,)


@dataclasses.dataclass(frozen=True, eq=False)
class Scene:
    """Immutable labeled mesh. Arrays are read-only, shareable across threads."""

    vertices: np.ndarray  # (N, 3) float64
    triangles: np.ndarray  # (M, 3) int32 vertex indices
    triangle_instance: np.ndarray  # (M,) int32, 0 = structure
    instances: tuple[ObjectInstance, ...]
    bounds_min: np.ndarray  # (3,)
    bounds_max: np.ndarray  # (3,)

    def instance(self, instance_id: int) -> ObjectInstance:
        for inst in self.instances:
            if inst.id == instance_id:
                return inst
        raise KeyError(f"no instance with id {instance_id}")

    @property
    def instance_ids(self) -> tuple[int, ...]:
        return tuple(inst.id for inst in self.instances)

    def triangles_of(self, instance_id: int) -> np.ndarray:
        """Indices of the triangles labeled with ``instance_id``."""
        return np.flatnonzero(self.triangle_instance == instance_id)

    def equals(self, other: "Scene") -> bool:
        return (
            np.array_equal(self.vertices, other.vertices)
            and np.array_equal(self.triangles, other.triangles)
            and np.array_equal(self.triangle_instance, other.triangle_instance)
            and len(self.instances) == len(other.instances)
            and all(
                a.id == b.id
                and a.category == b.category
                and np.allclose(a.centroid, b.centroid, atol=0.0, rtol=0.0)
                and np.allclose(a.aabb_min, b.aabb_min, atol=0.0, rtol=0.0)
                and np.allclose(a.aabb_max, b.aabb_max, atol=0.0, rtol=0.0)
                for a, b in zip(self.instances, other.instances)
            )
        )


def _triangle_areas_and_centroids(
    vertices: np.ndarray, triangles: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    a = vertices[triangles[:, 0]]
    b = vertices[triangles[:, 1]]
    c = vertices[triangles[:, 2]]
    areas = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
    centroids = (a + b + c) / 3.0
    return areas, centroids


def build_scene(
    vertices: np.ndarray,
    triangles: np.ndarray,
    triangle_instance: np.ndarray,
    instance_table: list[tuple[int, str]],
) -> Scene:
    """Validate raw arrays and derive per-instance summaries.

    The instance table is (id, category) pairs; centroids, AABBs, and scene
    bounds are recomputed here. Raises SceneValidationError on dangling
    triangle indices, labels missing from the table, table entries with no
    labeled triangles, non-finite coordinates, or malformed categories.
    """
    vertices = np.ascontiguousarray(np.asarray(vertices, dtype=np.float64))
    triangles = np.ascontiguousarray(np.asarray(triangles, dtype=np.int32))
    triangle_instance = np.ascontiguousarray(
        np.asarray(triangle_instance, dtype=np.int32)
    )
    if vertices.ndim != 2 or vertices.shape[1] != 3:
        raise SceneValidationError("vertices must be (N, 3)")
    if triangles.ndim != 2 or triangles.shape[1] != 3:
        raise SceneValidationError("triangles must be (M, 3)")
    if triangle_instance.shape != (triangles.shape[0],):
        raise SceneValidationError("one instance label per triangle required")
    if vertices.size and not np.isfinite(vertices).all():
        raise SceneValidationError("vertex coordinates must be finite")
    if triangles.size:
        if triangles.min() < 0 or triangles.max() >= len(vertices):
            raise SceneValidationError(
                f"triangle index out of range (vertex count {len(vertices)})"
            )
    if len(vertices) == 0 or len(triangles) == 0:
        raise SceneValidationError("scene needs at least one triangle")

    ids = [iid for iid, _ in instance_table]
    if any(iid <= 0 for iid in ids):
        raise SceneValidationError("instance ids must be positive")
    if len(set(ids)) != len(ids):
        raise SceneValidationError("duplicate instance id in table")
    for iid, category in instance_table:
        if not _CATEGORY_RE.match(category):
            raise SceneValidationError(f"malformed category {category!r}")
    table = {iid: category for iid, category in instance_table}
    labeled = set(int(v) for v in np.unique(triangle_instance)) - {0}
    if not labeled <= set(table):
        missing = sorted(labeled - set(table))
        raise SceneValidationError(f"triangle labels missing from table: {missing}")

    areas, centroids = _triangle_areas_and_centroids(vertices, triangles)
    instances = []
    for iid in sorted(table):
        sel = triangle_instance == iid
        if not sel.any():
            raise SceneValidationError(f"instance {iid} has no labeled triangles")
        total = areas[sel].sum()
        if total <= 0.0:
            raise SceneValidationError(f"instance {iid} has zero surface area")
        centroid = (centroids[sel] * areas[sel, None]).sum(axis=0) / total
        corner_idx = np.unique(triangles[sel])
        corners = vertices[corner_idx]
        instances.append(
            ObjectInstance(
                id=iid,
                category=table[iid],
                centroid=centroid,
                aabb_min=corners.min(axis=0),
                aabb_max=corners.max(axis=0),
            )
        )

    for arr in (vertices, triangles, triangle_instance):
        arr.setflags(write=False)
    return Scene(
        vertices=vertices,
        triangles=triangles,
        triangle_instance=triangle_instance,
        instances=tuple(instances),
        bounds_min=vertices.min(axis=0),
        bounds_max=vertices.max(axis=0),
    )


# ---------------------------------------------------------------------------
# File format (docs/scene_format.md)
# ---------------------------------------------------------------------------


def _fmt_float(value: float) -> str:
    # repr() is the shortest string that round-trips the float exactly,
    # which is what makes save -> load -> save byte-identical.
    return repr(float(value))


def save_scene(scene: Scene, path: str | Path) -> None:
    """Write a scene in canonical text form (instances sorted by id)."""
    out = io.StringIO()
    out.write(f"{FORMAT_MAGIC} {FORMAT_VERSION}\n")
    out.write(f"instances {len(scene.instances)}\n")
    for inst in sorted(scene.instances, key=lambda i: i.id):
        out.write(f"{inst.id} {inst.category}\n")
    out.write(f"vertices {len(scene.vertices)}\n")
    for x, y, z in scene.vertices:
        out.write(f"{_fmt_float(x)} {_fmt_float(y)} {_fmt_float(z)}\n")
    out.write(f"triangles {len(scene.triangles)}\n")
    for a, b, c in scene.triangles:
        out.write(f"{a} {b} {c}\n")
    out.write(f"labels {len(scene.triangle_instance)}\n")
    for label in scene.triangle_instance:
        out.write(f"{label}\n")
    out.write("end\n")
    Path(path).write_text(out.getvalue(), encoding="utf-8")


def load_scene(path: str | Path) -> Scene:
    """Load and validate a scene file; derived fields are recomputed."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.split("\n")
    pos = 0

    def next_line() -> str:
        nonlocal pos
        if pos >= len(lines):
            raise SceneParseError(f"{path}: unexpected end of file at line {pos + 1}")
        line = lines[pos]
        pos += 1
        return line

    def expect_count(keyword: str) -> int:
        line = next_line()
        parts = line.split()
        if len(parts) != 2 or parts[0] != keyword:
            raise SceneParseError(f"{path}:{pos}: expected '{keyword} <count>', got {line!r}")
        try:
            return int(parts[1])
        except ValueError as exc:
            raise SceneParseError(f"{path}:{pos}: bad count {parts[1]!r}") from exc

    header = next_line().split()
    if len(header) != 2 or header[0] != FORMAT_MAGIC:
        raise SceneParseError(f"{path}: not a {FORMAT_MAGIC} file")
    if header[1] != str(FORMAT_VERSION):
        raise SceneParseError(f"{path}: unsupported format version {header[1]}")

    n_instances = expect_count("instances")
    instance_table = []
    for _ in range(n_instances):
        parts = next_line().split()
        if len(parts) != 2:
            raise SceneParseError(f"{path}:{pos}: expected '<id> <category>'")
        try:
            instance_table.append((int(parts[0]), parts[1]))
        except ValueError as exc:
            raise SceneParseError(f"{path}:{pos}: bad instance id {parts[0]!r}") from exc

    def read_rows(keyword: str, width: int, dtype: type) -> np.ndarray:
        count = expect_count(keyword)
        rows = np.empty((count, width), dtype=dtype)
        for i in range(count):
            parts = next_line().split()
            if len(parts) != width:
                raise SceneParseError(f"{path}:{pos}: expected {width} fields")
            try:
                rows[i] = [dtype(p) for p in parts]
            except ValueError as exc:
                raise SceneParseError(f"{path}:{pos}: bad value in {keyword}") from exc
        return rows

    vertices = read_rows("vertices", 3, float)
    triangles = read_rows("triangles", 3, int)
    labels = read_rows("labels", 1, int)[:, 0]
    if next_line().strip() != "end":
        raise SceneParseError(f"{path}:{pos}: missing 'end' terminator")

    try:
        return build_scene(vertices, triangles, labels, instance_table)
    except SceneValidationError as exc:
        raise SceneValidationError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Procedural scenes
# ---------------------------------------------------------------------------

WALL_THICKNESS = 0.1
ROOM_HEIGHT = 2.5
DOOR_WIDTH = 0.9
_WALL_MARGIN = 0.3  # furniture clearance from walls
_DOOR_CLEARANCE = 1.2  # keep furniture this far from door gap centers
_OBJECT_GAP = 0.25  # minimum horizontal gap between furniture boxes

# Proxy-box size ranges per category: (width, height, depth) in meters.
_CATEGORY_DIMS = {
    "chair": ((0.45, 0.65), (0.80, 1.00), (0.45, 0.65)),
    "bed": ((1.40, 1.80), (0.50, 0.70), (1.90, 2.10)),
    "toilet": ((0.35, 0.45), (0.70, 0.85), (0.55, 0.70)),
    "couch": ((1.60, 2.20), (0.70, 0.90), (0.80, 1.00)),
    "plant": ((0.30, 0.50), (0.90, 1.50), (0.30, 0.50)),
    "tv": ((0.90, 1.40), (0.60, 0.90), (0.10, 0.15)),
}

# Outward-CCW quads of an axis-aligned box, as corner indices where corner
# bit pattern is (x << 2) | (y << 1) | z over {min, max}.
_BOX_QUADS = (
    (0, 1, 3, 2),  # -x
    (4, 6, 7, 5),  # +x
    (0, 4, 5, 1),  # -y
    (2, 3, 7, 6),  # +y
    (0, 2, 6, 4),  # -z
    (1, 5, 7, 3),  # +z
)


class _MeshBuilder:
    def __init__(self) -> None:
        self.vertices: list[np.ndarray] = []
        self.triangles: list[tuple[int, int, int]] = []
        self.labels: list[int] = []

    def _add_single_box(self, lo: np.ndarray, hi: np.ndarray, instance_id: int) -> None:
        base = len(self.vertices)
        for bits in range(8):
            corner = np.where(
                [bits & 4, bits & 2, bits & 1], hi, lo
            ).astype(np.float64)
            self.vertices.append(corner)
        for q0, q1, q2, q3 in _BOX_QUADS:
            self.triangles.append((base + q0, base + q1, base + q2))
            self.triangles.append((base + q0, base + q2, base + q3))
            self.labels.extend([instance_id, instance_id])

    def add_box(self, lo, hi, instance_id: int = 0, tile: float = 0.0) -> None:
        """Add an axis-aligned box; tile > 0 splits it into sub-boxes of at
        most that edge length (small triangles keep BVH queries cheap)."""
        lo = np.asarray(lo, dtype=np.float64)
        hi = np.asarray(hi, dtype=np.float64)
        if tile <= 0.0:
            self._add_single_box(lo, hi, instance_id)
            return
        counts = np.maximum(1, np.ceil((hi - lo) / tile).astype(int))
        edges = [np.linspace(lo[k], hi[k], counts[k] + 1) for k in range(3)]
        for i in range(counts[0]):
            for j in range(counts[1]):
                for k in range(counts[2]):
                    sub_lo = np.array([edges[0][i], edges[1][j], edges[2][k]])
                    sub_hi = np.array(
                        [edges[0][i + 1], edges[1][j + 1], edges[2][k + 1]]
                    )
                    self._add_single_box(sub_lo, sub_hi, instance_id)

    def build(self, instance_table: list[tuple[int, str]]) -> Scene:
        return build_scene(
            np.array(self.vertices), np.array(self.triangles), np.array(self.labels),
            instance_table,
        )


def _boxes_overlap_2d(a_lo, a_hi, b_lo, b_hi, gap: float) -> bool:
    return (
        a_lo[0] - gap < b_hi[0]
        and a_hi[0] + gap > b_lo[0]
        and a_lo[1] - gap < b_hi[1]
        and a_hi[1] + gap > b_lo[1]
    )


def generate_procedural_scene(
    rooms: int,
    objects_per_room: int,
    seed: int,
    *,
    max_attempts: int = 200,
) -> Scene:
    """Generate a strip of connected rooms furnished with labeled proxy boxes.

    Rooms are axis-aligned, share full-height walls pierced by door gaps,
    and sit on a common floor slab at y=0 with the ceiling at y=2.5.
    Furniture boxes draw their category and size from a per-seed RNG and are
    rejection-placed to avoid walls, door zones, and each other. The output
    is a pure function of (rooms, objects_per_room, seed).
    """
    if rooms < 1 or objects_per_room < 1:
        raise ValueError("rooms and objects_per_room must be >= 1")
    rng = np.random.default_rng(seed)
    t = WALL_THICKNESS

    depth = float(rng.uniform(4.0, 6.0))
    widths = [float(rng.uniform(3.5, 5.5)) for _ in range(rooms)]
    starts = [0.0]
    for w in widths[:-1]:
        starts.append(starts[-1] + w + t)
    total_w = starts[-1] + widths[-1]

    mesh = _MeshBuilder()
    mesh.add_box((-t, -0.1, -t), (total_w + t, 0.0, depth + t))  # floor slab
    mesh.add_box((-t, ROOM_HEIGHT, -t), (total_w + t, ROOM_HEIGHT + 0.1, depth + t))
    mesh.add_box((-t, 0.0, -t), (total_w + t, ROOM_HEIGHT, 0.0))  # south
    mesh.add_box((-t, 0.0, depth), (total_w + t, ROOM_HEIGHT, depth + t))  # north
    mesh.add_box((-t, 0.0, 0.0), (0.0, ROOM_HEIGHT, depth))  # west
    mesh.add_box((total_w, 0.0, 0.0), (total_w + t, ROOM_HEIGHT, depth))  # east

    door_centers = []
    for i in range(rooms - 1):
        x0 = starts[i] + widths[i]
        gap_lo = float(rng.uniform(0.5, depth - 0.5 - DOOR_WIDTH))
        gap_hi = gap_lo + DOOR_WIDTH
        door_centers.append((x0 + t / 2.0, (gap_lo + gap_hi) / 2.0))
        if gap_lo > 0.0:
            mesh.add_box((x0, 0.0, 0.0), (x0 + t, ROOM_HEIGHT, gap_lo))
        if gap_hi < depth:
            mesh.add_box((x0, 0.0, gap_hi), (x0 + t, ROOM_HEIGHT, depth))

    instance_table = []
    placed: list[tuple[np.ndarray, np.ndarray]] = []  # (lo_xz, hi_xz)
    next_id = 1
    for room in range(rooms):
        rx0, rx1 = starts[room], starts[room] + widths[room]
        for _ in range(objects_per_room):
            spot = None
            for _attempt in range(max_attempts):
                # Redraw category and size each attempt, so one oversized
                # draw cannot dead-end an otherwise feasible room.
                category = CATEGORIES[int(rng.integers(len(CATEGORIES)))]
                (w_lo, w_hi), (h_lo, h_hi), (d_lo, d_hi) = _CATEGORY_DIMS[category]
                size = np.array(
                    [rng.uniform(w_lo, w_hi), rng.uniform(h_lo, h_hi), rng.uniform(d_lo, d_hi)]
                )
                cx = rng.uniform(rx0 + _WALL_MARGIN + size[0] / 2, rx1 - _WALL_MARGIN - size[0] / 2)
                cz = rng.uniform(_WALL_MARGIN + size[2] / 2, depth - _WALL_MARGIN - size[2] / 2)
                lo = np.array([cx - size[0] / 2, cz - size[2] / 2])
                hi = np.array([cx + size[0] / 2, cz + size[2] / 2])
                if any(
                    np.hypot(cx - dx, cz - dz) < _DOOR_CLEARANCE for dx, dz in door_centers
                ):
                    continue
                if any(_boxes_overlap_2d(lo, hi, plo, phi, _OBJECT_GAP) for plo, phi in placed):
                    continue
                placed_category, placed_height = category, float(size[1])
                spot = (lo, hi)
                break
            if spot is None:
                raise SceneGenerationError(
                    f"could not place object {next_id} in room {room} "
                    f"after {max_attempts} attempts"
                )
            lo, hi = spot
            mesh.add_box(
                (lo[0], 0.0, lo[1]), (hi[0], placed_height, hi[1]), instance_id=next_id
            )
            instance_table.append((next_id, placed_category))
            placed.append(spot)
            next_id += 1

    return mesh.build(instance_table)
