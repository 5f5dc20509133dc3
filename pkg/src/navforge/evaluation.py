"""Trajectory scoring (success, path-efficiency) and a shortest-path oracle.

An episode succeeds when the agent stops, intentionally, within 0.1 m of
some valid viewpoint. Efficiency weights success by the ratio of the
shortest viewpoint geodesic to the realized path length. The oracle agent
follows the grid geodesic with the discrete action space and serves as the
dataset's validity instrument: on a well-formed dataset it succeeds
everywhere with near-optimal paths.
"""

from __future__ import annotations

import dataclasses
import heapq
import json
import math
from pathlib import Path

import numpy as np

from navforge import _kernels
from navforge.episodes import Episode, EpisodeDataset
from navforge.nav import OccupancyGrid, distance_field, viewpoint_cells
from navforge.scene import Scene
from navforge.sim import (
    DEFAULT_STEP_LIMIT,
    FORWARD_STEP,
    TURN_ANGLE,
    Action,
    reset,
    step,
    swept_cells,
)

SUCCESS_RADIUS = 0.1
_STOP_MARGIN = 0.005  # the oracle stops this far inside the success radius


class EvaluationError(Exception):
    pass


@dataclasses.dataclass(frozen=True)
class Trajectory:
    """Actions plus the realized pose sequence (one pose before each action,
    plus the final pose)."""

    episode_id: str
    actions: tuple[Action, ...]
    poses: tuple[tuple[np.ndarray, float], ...]  # (position, heading) per step
    ended_with_stop: bool

    def __post_init__(self):
        if len(self.poses) != len(self.actions) + 1:
            raise ValueError("need len(actions) + 1 poses")

    @property
    def path_length(self) -> float:
        total = 0.0
        for (p0, _), (p1, _) in zip(self.poses, self.poses[1:]):
            total += math.hypot(p1[0] - p0[0], p1[2] - p0[2])
        return total

    @property
    def final_position(self) -> np.ndarray:
        return self.poses[-1][0]


@dataclasses.dataclass(frozen=True)
class EvalResult:
    success: int  # 0 or 1
    spl: float
    shortest_path: float
    agent_path: float
    distance_to_goal_at_end: float

    def to_json(self) -> dict:
        return dataclasses.asdict(self)


def _nearest_viewpoint_distance(position, viewpoints) -> float:
    return min(
        math.hypot(position[0] - vp.position[0], position[2] - vp.position[2])
        for vp in viewpoints
    )


def evaluate(trajectory: Trajectory, episode: Episode, grid: OccupancyGrid) -> EvalResult:
    """Score one trajectory against its episode.

    Success needs an intentional STOP strictly inside the 0.1 m radius of
    the nearest valid viewpoint (horizontal distance; the agent is a
    floor-bound cylinder). The shortest path is the minimum viewpoint
    geodesic from the episode start.
    """
    if trajectory.episode_id != episode.episode_id:
        raise EvaluationError(
            f"trajectory {trajectory.episode_id!r} does not belong to episode "
            f"{episode.episode_id!r}"
        )
    field = distance_field(grid, viewpoint_cells(grid, episode.viewpoints))
    shortest, _ = field.at((episode.start_position[0], episode.start_position[2]))
    if not math.isfinite(shortest):
        raise EvaluationError(f"episode {episode.episode_id}: goal unreachable from start")
    d_end = _nearest_viewpoint_distance(trajectory.final_position, episode.viewpoints)
    success = int(trajectory.ended_with_stop and d_end < SUCCESS_RADIUS)
    agent_path = trajectory.path_length
    denom = max(shortest, agent_path)
    spl = float(success) if denom == 0.0 else success * shortest / denom
    return EvalResult(
        success=success,
        spl=float(spl),
        shortest_path=float(shortest),
        agent_path=float(agent_path),
        distance_to_goal_at_end=float(d_end),
    )


# ---------------------------------------------------------------------------
# Oracle agent
# ---------------------------------------------------------------------------


def _segment_free(grid: OccupancyGrid, p0, p1) -> bool:
    cells = swept_cells(grid, np.asarray(p0, float), np.asarray(p1, float))
    return cells is not None and all(grid.free[c] for c in cells)


class _Runner:
    """Records actions/poses while driving the simulator."""

    def __init__(
        self,
        scene: Scene,
        grid: OccupancyGrid,
        episode: Episode,
        allow_sliding: bool = False,
    ):
        self.scene = scene
        self.grid = grid
        self.allow_sliding = allow_sliding
        self.state, _ = reset(scene, grid, episode)
        self.actions: list[Action] = []
        self.poses: list[tuple[np.ndarray, float]] = [
            (self.state.position.copy(), self.state.heading)
        ]
        self.done = False

    def act(self, action: Action) -> None:
        self.state, _, self.done = step(
            self.state, action, self.scene, self.grid,
            allow_sliding=self.allow_sliding,
        )
        self.actions.append(action)
        self.poses.append((self.state.position.copy(), self.state.heading))

    @property
    def steps(self) -> int:
        return len(self.actions)


_TURN_COST = 1e-4  # strictly positive so turn chains order deterministically
_POSITION_QUANTUM = 0.05  # state dedup resolution, meters
_MAX_REPLANS = 5


def _plan_actions(
    grid: OccupancyGrid,
    field,
    viewpoint_tree,
    start_xz,
    start_heading: float,
    stop_radius: float,
    *,
    max_expansions: int = 60_000,
) -> list[Action] | None:
    """A* over (position, discrete heading) using the simulator's own moves.

    Each edge is a turn chain plus one 0.25 m forward, validated by the same
    swept-cell predicate the simulator applies. The raw distance field is
    the heuristic; it can overestimate the remaining stride cost by the
    8-connected metric inflation (about 8%), trading that bounded
    suboptimality for a tight search. Positions are deduplicated on a
    cell-size lattice; the executor re-checks every move, so rare bin-merge
    artifacts only trigger a replan.
    """
    headings = [start_heading + k * TURN_ANGLE for k in range(12)]
    cos_sin = [(math.cos(h), math.sin(h)) for h in headings]
    free = grid.free
    origin = grid.origin
    cell = grid.cell_size

    def key_of(xz, h_idx):
        return (
            int(round(xz[0] / _POSITION_QUANTUM)),
            int(round(xz[1] / _POSITION_QUANTUM)),
            h_idx,
        )

    def field_at(xz):
        c = grid.cell_of(xz)
        if c is None:
            return math.inf
        return float(field.distance[c])

    start = (float(start_xz[0]), float(start_xz[1]))
    if not math.isfinite(field_at(start)):
        return None
    start_state = key_of(start, 0)
    heap = [(field_at(start), 0, 0.0, start, 0)]
    came_from: dict = {start_state: None}
    best_g: dict = {start_state: 0.0}
    counter = 1
    expansions = 0
    ends = np.empty((12, 2))
    starts = np.empty((12, 2))
    while heap:
        _, _, g, pos, h_idx = heapq.heappop(heap)
        state = key_of(pos, h_idx)
        if g > best_g.get(state, math.inf) + 1e-12:
            continue
        if field_at(pos) < 0.9 and viewpoint_tree.query(pos)[0] < stop_radius:
            actions: list[Action] = [Action.STOP]
            node = state
            while came_from[node] is not None:
                node, turn_k = came_from[node]
                actions.append(Action.MOVE_FORWARD)
                turn = Action.TURN_RIGHT if turn_k > 0 else Action.TURN_LEFT
                actions.extend([turn] * abs(turn_k))
            actions.reverse()
            return actions
        expansions += 1
        if expansions > max_expansions:
            return None
        for k in range(12):
            u = cos_sin[(h_idx + k) % 12]
            ends[k, 0] = pos[0] + FORWARD_STEP * u[0]
            ends[k, 1] = pos[1] + FORWARD_STEP * u[1]
        starts[:, 0] = pos[0]
        starts[:, 1] = pos[1]
        clear = _kernels.swept_segments_free(
            free, origin[0], origin[1], cell, starts, ends
        )
        for k in range(12):
            if not clear[k]:
                continue
            turn_k = k if k <= 6 else k - 12  # signed turns, right positive
            nh = (h_idx + k) % 12
            nxt = (float(ends[k, 0]), float(ends[k, 1]))
            ng = g + FORWARD_STEP + _TURN_COST * abs(turn_k)
            nstate = key_of(nxt, nh)
            if ng >= best_g.get(nstate, math.inf) - 1e-12:
                continue
            h_val = field_at(nxt)
            if not math.isfinite(h_val):
                continue
            best_g[nstate] = ng
            came_from[nstate] = (state, turn_k)
            heapq.heappush(heap, (ng + h_val, counter, ng, nxt, nh))
            counter += 1
    return None


def oracle_agent(
    episode: Episode,
    scene: Scene,
    grid: OccupancyGrid,
    max_steps: int = DEFAULT_STEP_LIMIT,
) -> Trajectory:
    """Plan with A* over the simulator's action space, execute, and STOP.

    Serves as the dataset validity instrument: on a well-formed episode the
    realized path stays near the grid-shortest path and the final pose
    lands strictly inside the success radius. Execution re-checks every
    forward; a blocked move triggers a bounded replan from the current pose.
    """
    from scipy.spatial import cKDTree

    field = distance_field(grid, viewpoint_cells(grid, episode.viewpoints))
    start_cell = grid.snap((episode.start_position[0], episode.start_position[2]))
    if start_cell is None or not math.isfinite(field.distance[start_cell]):
        raise EvaluationError(f"episode {episode.episode_id}: goal unreachable")
    tree = cKDTree(
        np.array([[vp.position[0], vp.position[2]] for vp in episode.viewpoints])
    )
    stop_radius = SUCCESS_RADIUS - _STOP_MARGIN

    runner = _Runner(scene, grid, episode)
    for _replan in range(_MAX_REPLANS):
        if _nearest_viewpoint_distance(runner.state.position, episode.viewpoints) < stop_radius:
            runner.act(Action.STOP)
            break
        plan = _plan_actions(
            grid,
            field,
            tree,
            runner.state.position[[0, 2]],
            runner.state.heading,
            stop_radius,
        )
        if plan is None:
            break
        diverged = False
        for action in plan:
            if runner.steps >= max_steps:
                break
            before = runner.state.position
            runner.act(action)
            if action is Action.MOVE_FORWARD and np.array_equal(
                before, runner.state.position
            ):
                diverged = True  # plan thought this move was free; replan
                break
        if runner.done or runner.steps >= max_steps or not diverged:
            break
    if not runner.done and runner.steps < max_steps:
        if _nearest_viewpoint_distance(runner.state.position, episode.viewpoints) < SUCCESS_RADIUS:
            runner.act(Action.STOP)
    return Trajectory(
        episode_id=episode.episode_id,
        actions=tuple(runner.actions),
        poses=tuple(runner.poses),
        ended_with_stop=runner.done,
    )


# ---------------------------------------------------------------------------
# Batch evaluation
# ---------------------------------------------------------------------------


def batch_evaluate(
    dataset: EpisodeDataset,
    trajectories,
    *,
    grid: OccupancyGrid,
) -> dict:
    """Aggregate results over a dataset; absent trajectories count as failures.

    ``trajectories`` is an iterable of Trajectory; duplicates for one
    episode are an error. Returns a JSON-ready report with means and a
    per-category breakdown.
    """
    by_id: dict[str, Trajectory] = {}
    for tr in trajectories:
        if tr.episode_id in by_id:
            raise EvaluationError(f"duplicate trajectory for episode {tr.episode_id!r}")
        by_id[tr.episode_id] = tr

    results = []
    per_category: dict[str, list[EvalResult]] = {}
    for ep in dataset.episodes:
        tr = by_id.pop(ep.episode_id, None)
        if tr is None:
            res = EvalResult(
                success=0,
                spl=0.0,
                shortest_path=float(ep.geodesic_distance),
                agent_path=0.0,
                distance_to_goal_at_end=float(ep.euclidean_distance),
            )
        else:
            res = evaluate(tr, ep, grid)
        results.append((ep, res))
        per_category.setdefault(ep.category, []).append(res)
    if by_id:
        raise EvaluationError(f"trajectories reference unknown episodes: {sorted(by_id)}")

    def summary(items: list[EvalResult]) -> dict:
        return {
            "episodes": len(items),
            "success": float(np.mean([r.success for r in items])) if items else 0.0,
            "spl": float(np.mean([r.spl for r in items])) if items else 0.0,
        }

    return {
        "overall": summary([r for _, r in results]),
        "per_category": {
            cat: summary(items) for cat, items in sorted(per_category.items())
        },
        "results": [
            {"episode_id": ep.episode_id, **res.to_json()} for ep, res in results
        ],
    }


def replay_actions(
    episode: Episode,
    actions,
    scene: Scene,
    grid: OccupancyGrid,
    *,
    allow_sliding: bool = False,
) -> Trajectory:
    """Re-simulate an action list into a full Trajectory (poses included)."""
    runner = _Runner(scene, grid, episode, allow_sliding=allow_sliding)
    for action in actions:
        if runner.done or runner.steps >= DEFAULT_STEP_LIMIT:
            break
        runner.act(Action(action))
    return Trajectory(
        episode_id=episode.episode_id,
        actions=tuple(runner.actions),
        poses=tuple(runner.poses),
        ended_with_stop=runner.done,
    )


def load_trajectories(path: str | Path) -> list[tuple[str, list[str]]]:
    """Read the trajectory JSONL interchange: one {episode_id, actions} per line."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                data = json.loads(line)
                out.append((data["episode_id"], list(data["actions"])))
    return out


def save_trajectories(items, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for tr in items:
            fh.write(
                json.dumps(
                    {
                        "episode_id": tr.episode_id,
                        "actions": [a.value for a in tr.actions],
                    }
                )
                + "\n"
            )
