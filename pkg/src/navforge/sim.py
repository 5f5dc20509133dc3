"""Discrete-action embodied simulator: stepping, collisions, observations.

The agent is a vertical cylinder on the occupancy grid. Forward motion is
all-or-nothing: the 0.25 m step happens only when every grid cell swept by
the move is free (no sliding along obstacles). Observations are rendered
lazily, so planners that only need poses pay nothing for pixels.
"""

from __future__ import annotations

import dataclasses
import enum
import functools
import math
from typing import TYPE_CHECKING

import numpy as np

from navforge.nav import AgentBody, OccupancyGrid
from navforge.render import GoalCamera, render, shade
from navforge.scene import Scene

if TYPE_CHECKING:
    from navforge.episodes import Episode

FORWARD_STEP = 0.25
TURN_ANGLE = math.radians(30.0)
SENSOR_HFOV = math.radians(58.0)
SENSOR_WIDTH = 640
SENSOR_HEIGHT = 480
DEFAULT_STEP_LIMIT = 1000
TWO_PI = 2.0 * math.pi


class SimError(Exception):
    pass


class Action(str, enum.Enum):
    MOVE_FORWARD = "MOVE_FORWARD"
    TURN_LEFT = "TURN_LEFT"
    TURN_RIGHT = "TURN_RIGHT"
    STOP = "STOP"


@dataclasses.dataclass(frozen=True)
class AgentState:
    position: np.ndarray  # (3,) meters; y is the supporting floor height
    heading: float  # radians in [0, 2pi); 0 faces +x, increasing toward +z
    start_position: np.ndarray
    start_heading: float

    def forward_xz(self) -> np.ndarray:
        return np.array([math.cos(self.heading), math.sin(self.heading)])


@dataclasses.dataclass(frozen=True)
class SensorSpec:
    """Constants of the agent's forward RGBD camera."""

    height: float  # mount height above the floor, meters
    hfov: float  # radians
    width: int
    height_px: int


@dataclasses.dataclass(eq=False)
class Observation:
    """Agent-frame observation; images render on first access."""

    gps: tuple[float, float]  # (along start heading, along start right), meters
    compass: float  # heading relative to start, radians in [0, 2pi)
    sensor: SensorSpec
    _scene: Scene = dataclasses.field(repr=False)
    _camera: GoalCamera = dataclasses.field(repr=False)

    @functools.cached_property
    def _render(self):
        return render(self._scene, self._camera)

    @property
    def depth(self) -> np.ndarray:
        """(480, 640) float32 meters; inf where nothing is hit."""
        return self._render.depth

    @functools.cached_property
    def rgb(self) -> np.ndarray:
        """(480, 640, 3) uint8 flat per-instance colors."""
        return shade(self._render)


def _wrap_angle(angle: float) -> float:
    return angle % TWO_PI


def _observe(scene: Scene, state: AgentState, body: AgentBody) -> Observation:
    delta = state.position - state.start_position
    cos0 = math.cos(state.start_heading)
    sin0 = math.sin(state.start_heading)
    gps = (
        float(cos0 * delta[0] + sin0 * delta[2]),
        float(-sin0 * delta[0] + cos0 * delta[2]),
    )
    camera = GoalCamera(
        position=np.array(
            [state.position[0], state.position[1] + body.sensor_height, state.position[2]]
        ),
        yaw=state.heading,
        pitch=0.0,
        hfov=SENSOR_HFOV,
        width=SENSOR_WIDTH,
        height=SENSOR_HEIGHT,
    )
    return Observation(
        gps=gps,
        compass=_wrap_angle(state.heading - state.start_heading),
        sensor=SensorSpec(
            height=body.sensor_height,
            hfov=SENSOR_HFOV,
            width=SENSOR_WIDTH,
            height_px=SENSOR_HEIGHT,
        ),
        _scene=scene,
        _camera=camera,
    )


def reset(
    scene: Scene,
    grid: OccupancyGrid,
    episode: "Episode",
    body: AgentBody = AgentBody(),
) -> tuple[AgentState, Observation]:
    """Place the agent at the episode start; GPS reads (0, 0), compass 0."""
    return reset_at(
        scene, grid, episode.start_position, episode.start_heading, body=body
    )


def reset_at(
    scene: Scene,
    grid: OccupancyGrid,
    position,
    heading: float,
    body: AgentBody = AgentBody(),
) -> tuple[AgentState, Observation]:
    position = np.asarray(position, dtype=np.float64)
    cell = grid.cell_of((position[0], position[2]))
    if cell is None or not grid.free[cell]:
        raise SimError(f"start pose {position[[0, 2]]} is not on a free cell")
    position = np.array(
        [position[0], float(grid.floor_y[cell]), position[2]]
    )
    state = AgentState(
        position=position,
        heading=_wrap_angle(float(heading)),
        start_position=position,
        start_heading=_wrap_angle(float(heading)),
    )
    return state, _observe(scene, state, body)


def swept_cells(
    grid: OccupancyGrid, p0: np.ndarray, p1: np.ndarray
) -> list[tuple[int, int]] | None:
    """Every grid cell the segment passes through (Amanatides-Woo walk).

    Returns None when the segment leaves the grid. Exact corner crossings
    include both side cells, so motion cannot squeeze between diagonal
    blockers.
    """
    c0 = grid.cell_of(p0)
    c1 = grid.cell_of(p1)
    if c0 is None or c1 is None:
        return None
    cells = [c0]
    i, j = c0
    di = p1[0] - p0[0]
    dj = p1[1] - p0[1]
    step_i = 1 if di > 0 else -1
    step_j = 1 if dj > 0 else -1
    inv_i = abs(1.0 / di) if di != 0 else math.inf
    inv_j = abs(1.0 / dj) if dj != 0 else math.inf

    def boundary(cell_idx: int, axis: int, step: int) -> float:
        edge = grid.origin[axis] + (cell_idx + (1 if step > 0 else 0)) * grid.cell_size
        return edge

    t_max_i = (
        abs(boundary(i, 0, step_i) - p0[0]) * inv_i if di != 0 else math.inf
    )
    t_max_j = (
        abs(boundary(j, 1, step_j) - p0[1]) * inv_j if dj != 0 else math.inf
    )
    dt_i = grid.cell_size * inv_i
    dt_j = grid.cell_size * inv_j
    guard = 0
    while (i, j) != c1:
        guard += 1
        if guard > 10000:
            return None
        if abs(t_max_i - t_max_j) < 1e-12:
            cells.append((i + step_i, j))
            cells.append((i, j + step_j))
            i += step_i
            j += step_j
            t_max_i += dt_i
            t_max_j += dt_j
        elif t_max_i < t_max_j:
            i += step_i
            t_max_i += dt_i
        else:
            j += step_j
            t_max_j += dt_j
        if not (0 <= i < grid.free.shape[0] and 0 <= j < grid.free.shape[1]):
            return None
        cells.append((i, j))
    return cells


def forward_clear(grid: OccupancyGrid, state: AgentState) -> bool:
    """Would a MOVE_FORWARD from this state succeed?"""
    p0 = np.array([state.position[0], state.position[2]])
    p1 = p0 + FORWARD_STEP * state.forward_xz()
    cells = swept_cells(grid, p0, p1)
    return cells is not None and all(grid.free[c] for c in cells)


def step(
    state: AgentState,
    action: Action,
    scene: Scene,
    grid: OccupancyGrid,
    body: AgentBody = AgentBody(),
    *,
    allow_sliding: bool = False,
) -> tuple[AgentState, Observation, bool]:
    """Apply one discrete action; returns (state, observation, done).

    Turns rotate exactly 30 degrees in place. A blocked forward leaves the
    pose unchanged; that is the benchmark rule. ``allow_sliding`` is an
    ablation switch that projects a blocked forward onto whichever axis
    component stays collision-free (note: sliding displaces less than the
    full stride, so path lengths stop being multiples of 0.25 m).
    """
    action = Action(action)
    if action is Action.STOP:
        return state, _observe(scene, state, body), True
    if action is Action.TURN_LEFT:
        state = dataclasses.replace(state, heading=_wrap_angle(state.heading - TURN_ANGLE))
    elif action is Action.TURN_RIGHT:
        state = dataclasses.replace(state, heading=_wrap_angle(state.heading + TURN_ANGLE))
    elif action is Action.MOVE_FORWARD:
        move = FORWARD_STEP * state.forward_xz()
        target = None
        if forward_clear(grid, state):
            target = (state.position[0] + move[0], state.position[2] + move[1])
        elif allow_sliding:
            p0 = np.array([state.position[0], state.position[2]])
            options = []
            for slide in (np.array([move[0], 0.0]), np.array([0.0, move[1]])):
                length = float(np.hypot(*slide))
                if length < 1e-12:
                    continue
                p1 = p0 + slide
                cells = swept_cells(grid, p0, p1)
                if cells is not None and all(grid.free[c] for c in cells):
                    options.append((length, tuple(p1)))
            if options:
                target = max(options)[1]
        if target is not None:
            cell = grid.cell_of(target)
            state = dataclasses.replace(
                state,
                position=np.array([target[0], float(grid.floor_y[cell]), target[1]]),
            )
    return state, _observe(scene, state, body), False
