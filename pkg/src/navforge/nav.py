"""Navigability: occupancy grid, geodesic distances, viewpoint computation.

The world model is a 2D occupancy grid over the scene footprint. A cell is
free when the cylinder agent centered there has floor support and full
vertical clearance; obstacle inflation happens by blocking every cell
whose center is within the agent radius of an obstacle footprint. All
downstream distance logic (episode sampling, SPL) runs on this grid.
"""

from __future__ import annotations

import dataclasses
import json
import math
import weakref
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from navforge.render import segments_clear, support_heights
from navforge.rng import rng_for
from navforge.scene import ObjectInstance, Scene

UNREACHABLE = math.inf
SNAP_RADIUS = 0.2  # query points snap to the nearest free cell this far away
_STEP_CLEARANCE = 0.02  # geometry lower than this above the floor is not an obstacle
VIEWPOINT_BAND = 1.0  # viewpoints live within this distance of the object box
VISIBILITY_SAMPLES = 64


class NavError(Exception):
    pass


@dataclasses.dataclass(frozen=True)
class AgentBody:
    """Cylinder embodiment with a mast-mounted sensor."""

    radius: float = 0.17
    height: float = 1.41
    sensor_height: float = 1.31

    def __post_init__(self):
        if self.radius <= 0.0:
            raise ValueError("radius must be positive")
        if not self.sensor_height < self.height:
            raise ValueError("sensor must sit below the agent's top")


@dataclasses.dataclass(frozen=True)
class Viewpoint:
    """Floor position near an object from which it is oracle-visible."""

    position: np.ndarray  # (3,) on the floor
    object_id: int


@dataclasses.dataclass(frozen=True, eq=False)
class OccupancyGrid:
    """Free/blocked cells plus per-cell floor height over the scene footprint."""

    cell_size: float
    origin: np.ndarray  # (2,) world (x, z) of the corner of cell (0, 0)
    free: np.ndarray  # (nx, nz) bool
    floor_y: np.ndarray  # (nx, nz) float64, NaN without support

    @property
    def shape(self) -> tuple[int, int]:
        return self.free.shape

    def cell_of(self, point_xz) -> tuple[int, int] | None:
        i = int(math.floor((point_xz[0] - self.origin[0]) / self.cell_size))
        j = int(math.floor((point_xz[1] - self.origin[1]) / self.cell_size))
        if 0 <= i < self.free.shape[0] and 0 <= j < self.free.shape[1]:
            return i, j
        return None

    def center_of(self, cell: tuple[int, int]) -> np.ndarray:
        return self.origin + (np.asarray(cell, dtype=np.float64) + 0.5) * self.cell_size

    def is_free(self, point_xz) -> bool:
        cell = self.cell_of(point_xz)
        return cell is not None and bool(self.free[cell])

    def floor_at(self, point_xz) -> float:
        cell = self.cell_of(point_xz)
        if cell is None:
            return math.nan
        return float(self.floor_y[cell])

    def snap(self, point_xz, radius: float = SNAP_RADIUS) -> tuple[int, int] | None:
        """Nearest free cell whose center is within ``radius`` of the point."""
        if self.is_free(point_xz):
            return self.cell_of(point_xz)
        reach = int(math.ceil(radius / self.cell_size)) + 1
        anchor = self.cell_of(point_xz)
        if anchor is None:
            ci = int(round((point_xz[0] - self.origin[0]) / self.cell_size))
            cj = int(round((point_xz[1] - self.origin[1]) / self.cell_size))
            anchor = (ci, cj)
        best = None
        best_d = radius
        for i in range(anchor[0] - reach, anchor[0] + reach + 1):
            if not 0 <= i < self.free.shape[0]:
                continue
            for j in range(anchor[1] - reach, anchor[1] + reach + 1):
                if not 0 <= j < self.free.shape[1] or not self.free[i, j]:
                    continue
                d = float(np.hypot(*(self.center_of((i, j)) - point_xz)))
                if d <= best_d:
                    best_d = d
                    best = (i, j)
        return best


def _point_to_triangle_2d(points: np.ndarray, tri: np.ndarray) -> np.ndarray:
    """Distance from 2D points to a (possibly degenerate) 2D triangle."""
    d = np.full(len(points), np.inf)
    for k in range(3):
        a, b = tri[k], tri[(k + 1) % 3]
        ab = b - a
        denom = float(ab @ ab)
        if denom > 0.0:
            t = np.clip(((points - a) @ ab) / denom, 0.0, 1.0)
            proj = a + t[:, None] * ab
        else:
            proj = np.broadcast_to(a, points.shape)
        d = np.minimum(d, np.linalg.norm(points - proj, axis=1))
    cross = [
        np.cross(tri[(k + 1) % 3] - tri[k], points - tri[k]) for k in range(3)
    ]
    inside = (
        (cross[0] >= 0) & (cross[1] >= 0) & (cross[2] >= 0)
    ) | ((cross[0] <= 0) & (cross[1] <= 0) & (cross[2] <= 0))
    area2 = abs(float(np.cross(tri[1] - tri[0], tri[2] - tri[0])))
    if area2 > 1e-12:
        d = np.where(inside, 0.0, d)
    return d


def build_occupancy(
    scene: Scene, body: AgentBody = AgentBody(), cell_size: float = 0.05
) -> OccupancyGrid:
    """Rasterize agent navigability over the scene footprint.

    Support comes from a per-cell down raycast onto up-facing surfaces;
    clearance blocks any cell whose center is within the agent radius of a
    triangle footprint overlapping the body's vertical span.
    """
    if not 0.0 < cell_size <= body.radius:
        raise ValueError("cell_size must be in (0, body.radius]")
    lo = scene.bounds_min
    hi = scene.bounds_max
    nx = max(1, int(math.ceil((hi[0] - lo[0]) / cell_size)))
    nz = max(1, int(math.ceil((hi[2] - lo[2]) / cell_size)))
    origin = np.array([lo[0], lo[2]])

    ii, jj = np.meshgrid(np.arange(nx), np.arange(nz), indexing="ij")
    centers = origin + (np.stack([ii, jj], axis=-1).reshape(-1, 2) + 0.5) * cell_size
    floor = support_heights(scene, centers).reshape(nx, nz)
    if not np.isfinite(floor).any():
        raise NavError("degenerate scene: no floor support anywhere")

    free = np.isfinite(floor)
    verts = scene.vertices
    tris = scene.triangles
    tri_y_min = verts[tris, 1].min(axis=1)
    tri_y_max = verts[tris, 1].max(axis=1)
    tri_xz = verts[:, [0, 2]][tris]  # (M, 3, 2)

    for m in range(len(tris)):
        t2 = tri_xz[m]
        pad = body.radius + cell_size
        i0 = max(0, int((t2[:, 0].min() - pad - origin[0]) / cell_size))
        i1 = min(nx - 1, int((t2[:, 0].max() + pad - origin[0]) / cell_size))
        j0 = max(0, int((t2[:, 1].min() - pad - origin[1]) / cell_size))
        j1 = min(nz - 1, int((t2[:, 1].max() + pad - origin[1]) / cell_size))
        if i0 > i1 or j0 > j1:
            continue
        patch = free[i0 : i1 + 1, j0 : j1 + 1]
        if not patch.any():
            continue
        pi, pj = np.nonzero(patch)
        cells_flat = np.stack([pi + i0, pj + j0], axis=1)
        pts = origin + (cells_flat + 0.5) * cell_size
        cell_floor = floor[cells_flat[:, 0], cells_flat[:, 1]]
        overlaps = (tri_y_max[m] > cell_floor + _STEP_CLEARANCE) & (
            tri_y_min[m] < cell_floor + body.height
        )
        if not overlaps.any():
            continue
        near = _point_to_triangle_2d(pts, t2) <= body.radius
        hit = overlaps & near
        free[cells_flat[hit, 0], cells_flat[hit, 1]] = False

    free.setflags(write=False)
    floor.setflags(write=False)
    return OccupancyGrid(cell_size=cell_size, origin=origin, free=free, floor_y=floor)


# ---------------------------------------------------------------------------
# Geodesics on the grid graph
# ---------------------------------------------------------------------------


@dataclasses.dataclass(eq=False)
class _GridGraph:
    node_of_cell: np.ndarray  # (nx, nz) int32, -1 where blocked
    cells: np.ndarray  # (n_nodes, 2)
    matrix: csr_matrix


_graph_cache: "weakref.WeakKeyDictionary[OccupancyGrid, _GridGraph]" = (
    weakref.WeakKeyDictionary()
)

# 8-connected moves; diagonal steps additionally require both adjacent
# orthogonal cells to be free (no squeezing through corners).
_MOVES = (
    (1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0),
    (1, 1, math.sqrt(2)), (1, -1, math.sqrt(2)),
    (-1, 1, math.sqrt(2)), (-1, -1, math.sqrt(2)),
)


def grid_graph(grid: OccupancyGrid) -> _GridGraph:
    graph = _graph_cache.get(grid)
    if graph is not None:
        return graph
    free = grid.free
    nx, nz = free.shape
    node_of_cell = np.full((nx, nz), -1, dtype=np.int32)
    cells = np.argwhere(free)
    node_of_cell[cells[:, 0], cells[:, 1]] = np.arange(len(cells), dtype=np.int32)

    rows, cols, data = [], [], []
    for di, dj, w in _MOVES:
        src_i = slice(max(0, -di), nx - max(0, di))
        src_j = slice(max(0, -dj), nz - max(0, dj))
        dst_i = slice(max(0, di), nx + min(0, di))
        dst_j = slice(max(0, dj), nz + min(0, dj))
        ok = free[src_i, src_j] & free[dst_i, dst_j]
        if di != 0 and dj != 0:
            ok = ok & free[dst_i, src_j] & free[src_i, dst_j]
        a = node_of_cell[src_i, src_j][ok]
        b = node_of_cell[dst_i, dst_j][ok]
        rows.append(a)
        cols.append(b)
        data.append(np.full(len(a), w * grid.cell_size))
    matrix = csr_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(len(cells), len(cells)),
    )
    graph = _GridGraph(node_of_cell=node_of_cell, cells=cells, matrix=matrix)
    _graph_cache[grid] = graph
    return graph


def geodesic_distance(grid: OccupancyGrid, start_xz, goal_xz) -> float:
    """Shortest traversable path length in meters, or UNREACHABLE (inf).

    Endpoints snap to the nearest free cell within 0.2 m; distances are
    measured between cell centers over the 8-connected free-cell graph.
    """
    a = grid.snap(start_xz)
    b = grid.snap(goal_xz)
    if a is None or b is None:
        return UNREACHABLE
    if a == b:
        return 0.0
    graph = grid_graph(grid)
    src = graph.node_of_cell[a]
    dst = graph.node_of_cell[b]
    dist = dijkstra(graph.matrix, directed=False, indices=src, min_only=False)
    return float(dist[dst])


@dataclasses.dataclass(eq=False)
class DistanceField:
    """Min geodesic distance from a set of source cells to every cell."""

    grid: OccupancyGrid
    distance: np.ndarray  # (nx, nz), inf where unreachable/blocked
    source_index: np.ndarray  # (nx, nz) index into sources, -1 unreachable
    predecessor: np.ndarray  # node-level predecessor array (toward source)
    source_cells: list[tuple[int, int]]

    def at(self, point_xz) -> tuple[float, int]:
        """(distance, winning source index) for a world point."""
        cell = self.grid.snap(point_xz)
        if cell is None:
            return UNREACHABLE, -1
        return float(self.distance[cell]), int(self.source_index[cell])


def distance_field(grid: OccupancyGrid, source_cells) -> DistanceField:
    graph = grid_graph(grid)
    source_cells = [tuple(c) for c in source_cells]
    nodes = np.array(
        [graph.node_of_cell[c] for c in source_cells if graph.node_of_cell[c] >= 0],
        dtype=np.int64,
    )
    node_source = {}
    for idx, cell in enumerate(source_cells):
        node = int(graph.node_of_cell[cell])
        if node >= 0 and node not in node_source:
            node_source[node] = idx
    nx, nz = grid.free.shape
    if len(nodes) == 0:
        return DistanceField(
            grid=grid,
            distance=np.full((nx, nz), np.inf),
            source_index=np.full((nx, nz), -1, dtype=np.int64),
            predecessor=np.empty(0, dtype=np.int32),
            source_cells=source_cells,
        )
    dist, pred, sources = dijkstra(
        graph.matrix,
        directed=False,
        indices=np.unique(nodes),
        min_only=True,
        return_predecessors=True,
    )
    distance = np.full((nx, nz), np.inf)
    source_index = np.full((nx, nz), -1, dtype=np.int64)
    cells = graph.cells
    distance[cells[:, 0], cells[:, 1]] = dist
    reachable = np.isfinite(dist)
    mapped = np.array([node_source.get(int(s), -1) for s in sources[reachable]])
    source_index[cells[reachable, 0], cells[reachable, 1]] = mapped
    return DistanceField(
        grid=grid,
        distance=distance,
        source_index=source_index,
        predecessor=pred,
        source_cells=source_cells,
    )


def shortest_cell_path(
    field: DistanceField, start_cell: tuple[int, int]
) -> list[tuple[int, int]] | None:
    """Cell path from ``start_cell`` to its nearest source, inclusive."""
    graph = grid_graph(field.grid)
    node = int(graph.node_of_cell[start_cell])
    if node < 0 or not np.isfinite(field.distance[start_cell]):
        return None
    path = [start_cell]
    while True:
        nxt = int(field.predecessor[node])
        if nxt < 0:  # reached a source
            return path
        node = nxt
        path.append(tuple(graph.cells[node]))


def sample_standable(
    grid: OccupancyGrid, seed: int | np.random.Generator, n: int
) -> np.ndarray:
    """n standable (x, z) points, uniform over free cells, jittered in-cell."""
    cells = np.argwhere(grid.free)
    if len(cells) == 0:
        raise NavError("grid has no free cells")
    rng = seed if isinstance(seed, np.random.Generator) else rng_for(seed, "standable")
    picks = cells[rng.integers(len(cells), size=n)]
    jitter = rng.uniform(0.0, grid.cell_size, size=(n, 2))
    return grid.origin + picks * grid.cell_size + jitter


def _rect_distance_2d(points: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    d = np.maximum(np.maximum(lo - points, points - hi), 0.0)
    return np.linalg.norm(d, axis=1)


def surface_samples(
    scene: Scene, obj: ObjectInstance, count: int = VISIBILITY_SAMPLES
) -> np.ndarray:
    """Stratified area-weighted points on the object's labeled triangles."""
    tri_idx = scene.triangles_of(obj.id)
    tris = scene.triangles[tri_idx]
    a = scene.vertices[tris[:, 0]]
    b = scene.vertices[tris[:, 1]]
    c = scene.vertices[tris[:, 2]]
    areas = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
    cum = np.cumsum(areas)
    cum /= cum[-1]
    rng = rng_for("surface-samples", obj.id)
    strata = (np.arange(count) + 0.5) / count
    chosen = np.searchsorted(cum, strata)
    r1 = np.sqrt(rng.uniform(size=count))
    r2 = rng.uniform(size=count)
    return (
        (1.0 - r1)[:, None] * a[chosen]
        + (r1 * (1.0 - r2))[:, None] * b[chosen]
        + (r1 * r2)[:, None] * c[chosen]
    )


def compute_viewpoints(
    scene: Scene,
    grid: OccupancyGrid,
    obj: ObjectInstance,
    body: AgentBody = AgentBody(),
) -> list[Viewpoint]:
    """Valid stopping positions: free lattice points near the object that
    can see it.

    Candidates lie on a half-agent-radius lattice within 1 m of the
    object's bounding-box footprint. A candidate survives when its grid
    cell is free and an unoccluded sightline exists from the sensor height
    to at least one of the object's stratified surface samples, regardless
    of camera field of view.
    """
    step = body.radius / 2.0
    lo = np.array([obj.aabb_min[0], obj.aabb_min[2]]) - VIEWPOINT_BAND
    hi = np.array([obj.aabb_max[0], obj.aabb_max[2]]) + VIEWPOINT_BAND
    xs = np.arange(lo[0], hi[0] + step / 2.0, step)
    zs = np.arange(lo[1], hi[1] + step / 2.0, step)
    pts = np.stack(np.meshgrid(xs, zs, indexing="ij"), axis=-1).reshape(-1, 2)
    near = (
        _rect_distance_2d(
            pts,
            np.array([obj.aabb_min[0], obj.aabb_min[2]]),
            np.array([obj.aabb_max[0], obj.aabb_max[2]]),
        )
        <= VIEWPOINT_BAND
    )
    pts = pts[near]
    standable = []
    floors = []
    for p in pts:
        cell = grid.cell_of(p)
        if cell is not None and grid.free[cell]:
            standable.append(p)
            floors.append(float(grid.floor_y[cell]))
    if not standable:
        return []
    pts = np.array(standable)
    floors = np.array(floors)

    targets = surface_samples(scene, obj)
    n_pts, n_tgt = len(pts), len(targets)
    eyes = np.column_stack([pts[:, 0], floors + body.sensor_height, pts[:, 1]])
    starts = np.repeat(eyes, n_tgt, axis=0)
    ends = np.tile(targets, (n_pts, 1))
    clear = segments_clear(scene, starts, ends).reshape(n_pts, n_tgt)
    visible = clear.any(axis=1)

    return [
        Viewpoint(
            position=np.array([pts[k, 0], floors[k], pts[k, 1]]), object_id=obj.id
        )
        for k in range(n_pts)
        if visible[k]
    ]


def viewpoint_cells(grid: OccupancyGrid, viewpoints) -> list[tuple[int, int]]:
    """Grid cells under the viewpoints (deduplicated, order-preserving)."""
    seen = {}
    for vp in viewpoints:
        cell = grid.cell_of((vp.position[0], vp.position[2]))
        if cell is not None and grid.free[cell] and cell not in seen:
            seen[cell] = True
    return list(seen)


# ---------------------------------------------------------------------------
# Grid file format (docs/grid_format.md)
# ---------------------------------------------------------------------------

_GRID_MAGIC = b"FORGEGRID 1\n"


def save_grid(grid: OccupancyGrid, path: str | Path) -> None:
    header = {
        "cell_size": grid.cell_size,
        "origin": [float(grid.origin[0]), float(grid.origin[1])],
        "nx": int(grid.free.shape[0]),
        "nz": int(grid.free.shape[1]),
    }
    with open(path, "wb") as fh:
        fh.write(_GRID_MAGIC)
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode("utf-8"))
        fh.write(np.packbits(grid.free.reshape(-1)).tobytes())
        fh.write(grid.floor_y.astype("<f4").tobytes())


def load_grid(path: str | Path) -> OccupancyGrid:
    raw = Path(path).read_bytes()
    if not raw.startswith(_GRID_MAGIC):
        raise NavError(f"{path}: not a grid file")
    body = raw[len(_GRID_MAGIC) :]
    newline = body.index(b"\n")
    header = json.loads(body[:newline].decode("utf-8"))
    nx, nz = header["nx"], header["nz"]
    offset = newline + 1
    n_bits = nx * nz
    n_bytes = (n_bits + 7) // 8
    free = np.unpackbits(
        np.frombuffer(body, dtype=np.uint8, count=n_bytes, offset=offset)
    )[:n_bits].astype(bool).reshape(nx, nz)
    offset += n_bytes
    floor = (
        np.frombuffer(body, dtype="<f4", count=n_bits, offset=offset)
        .astype(np.float64)
        .reshape(nx, nz)
    )
    free.setflags(write=False)
    floor.setflags(write=False)
    return OccupancyGrid(
        cell_size=float(header["cell_size"]),
        origin=np.array(header["origin"], dtype=np.float64),
        free=free,
        floor_y=floor,
    )
