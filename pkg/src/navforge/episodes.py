"""Episode dataset construction: start sampling, goal allocation, stats.

Starts are drawn uniformly over standable cells and rejection-filtered:
the geodesic to the nearest valid viewpoint must be finite and must exceed
the straight-line distance by more than 5% (no trivial forward-only
episodes). Image goals are dealt round-robin so per-goal episode counts
differ by at most one. Everything is a pure function of
(scene, goals, config, seed): two runs with one seed produce identical
bytes on disk.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import shutil
from pathlib import Path

import numpy as np

import navforge
from navforge.coverage import ImageGoal
from navforge.nav import (
    AgentBody,
    DistanceField,
    OccupancyGrid,
    Viewpoint,
    build_occupancy,
    compute_viewpoints,
    distance_field,
    sample_standable,
    viewpoint_cells,
)
from navforge.render import GoalCamera
from navforge.rng import rng_for
from navforge.scene import Scene, load_scene, save_scene

logger = logging.getLogger(__name__)

MIN_DETOUR_RATIO = 1.05
DEFAULT_START_RETRIES = 200
DATASET_FORMAT_VERSION = 1
SCENE_FILE_NAME = "scene.forgescene"


class EpisodeError(Exception):
    pass


class StartSamplingExhausted(EpisodeError):
    """No start satisfying the rejection rules was found within the retry budget."""


@dataclasses.dataclass(frozen=True)
class Episode:
    episode_id: str
    scene_id: str
    start_position: np.ndarray  # (3,)
    start_heading: float
    goal: ImageGoal
    geodesic_distance: float  # min over viewpoints, from the start
    euclidean_distance: float  # straight-line to the viewpoint attaining the min
    viewpoints: tuple[Viewpoint, ...]

    @property
    def category(self) -> str:
        return self.goal.category

    @property
    def object_id(self) -> int:
        return self.goal.object_id


@dataclasses.dataclass(frozen=True)
class EpisodeDataset:
    split: str
    episodes: tuple[Episode, ...]
    provenance: dict

    def episode(self, episode_id: str) -> Episode:
        for ep in self.episodes:
            if ep.episode_id == episode_id:
                return ep
        raise KeyError(f"no episode {episode_id!r}")


@dataclasses.dataclass(frozen=True)
class StartSample:
    position: np.ndarray  # (3,)
    heading: float
    geodesic: float
    euclidean: float
    viewpoint_index: int


def sample_start(
    grid: OccupancyGrid,
    viewpoints: tuple[Viewpoint, ...] | list[Viewpoint],
    seed: int | np.random.Generator,
    *,
    max_retries: int = DEFAULT_START_RETRIES,
    field: DistanceField | None = None,
) -> StartSample:
    """One accepted start pose for an object's viewpoint set.

    Uniform standable position with uniform heading, accepted only when the
    geodesic to the nearest viewpoint is finite and geodesic/euclidean
    exceeds 1.05, with the euclidean leg measured to the viewpoint that
    attains the geodesic minimum. Both legs run between the same grid cell
    centers (the geodesic is a cell-path length), so sub-cell jitter cannot
    fabricate detours; accepted starts sit on cell centers.
    """
    if not viewpoints:
        raise EpisodeError("viewpoint set is empty")
    rng = seed if isinstance(seed, np.random.Generator) else rng_for(seed, "starts")
    if field is None:
        field = distance_field(grid, viewpoint_cells(grid, viewpoints))
    cell_to_vp = {}
    for idx, vp in enumerate(viewpoints):
        cell = grid.cell_of((vp.position[0], vp.position[2]))
        if cell is not None and cell not in cell_to_vp:
            cell_to_vp[cell] = idx

    for _ in range(max_retries):
        cell = grid.cell_of(sample_standable(grid, rng, 1)[0])
        heading = float(rng.uniform(0.0, 2.0 * math.pi))
        geodesic = float(field.distance[cell])
        source_idx = int(field.source_index[cell])
        if not math.isfinite(geodesic) or geodesic <= 0.0 or source_idx < 0:
            continue
        vp_cell = field.source_cells[source_idx]
        vp_index = cell_to_vp.get(vp_cell)
        if vp_index is None:
            continue
        center = grid.center_of(cell)
        euclidean = float(np.hypot(*(center - grid.center_of(vp_cell))))
        if euclidean <= 0.0 or geodesic / euclidean <= MIN_DETOUR_RATIO:
            continue
        return StartSample(
            position=np.array([center[0], float(grid.floor_y[cell]), center[1]]),
            heading=heading,
            geodesic=geodesic,
            euclidean=euclidean,
            viewpoint_index=vp_index,
        )
    raise StartSamplingExhausted(
        f"no valid start within {max_retries} draws (ratio > {MIN_DETOUR_RATIO})"
    )


def generate_dataset(
    scene: Scene,
    goals: list[ImageGoal],
    *,
    scene_id: str,
    seed: int,
    starts_per_instance: int = 20,
    split: str = "train",
    grid: OccupancyGrid | None = None,
    body: AgentBody = AgentBody(),
    max_retries: int = DEFAULT_START_RETRIES,
) -> EpisodeDataset:
    """Build the episode set: N starts per object, goals dealt round-robin.

    Objects whose starts cannot satisfy the rejection rules (or with no
    viewpoints at all) are skipped and logged, matching the benchmark's
    filtering stages. Episode streams are seeded per (seed, scene, object),
    so object order and parallelism cannot change the output.
    """
    if grid is None:
        grid = build_occupancy(scene, body)
    by_object: dict[int, list[ImageGoal]] = {}
    for goal in goals:
        by_object.setdefault(goal.object_id, []).append(goal)

    episodes = []
    for object_id in sorted(by_object):
        object_goals = by_object[object_id]
        obj = scene.instance(object_id)
        viewpoints = tuple(compute_viewpoints(scene, grid, obj, body))
        if not viewpoints:
            logger.warning("object %d (%s): no valid viewpoints, skipped", object_id, obj.category)
            continue
        field = distance_field(grid, viewpoint_cells(grid, viewpoints))
        rng = rng_for(seed, scene_id, object_id)
        object_episodes = []
        try:
            for k in range(starts_per_instance):
                start = sample_start(
                    grid, viewpoints, rng, max_retries=max_retries, field=field
                )
                goal = object_goals[k % len(object_goals)]
                object_episodes.append(
                    Episode(
                        episode_id=f"{scene_id}-{object_id:03d}-{k:04d}",
                        scene_id=scene_id,
                        start_position=start.position,
                        start_heading=start.heading,
                        goal=goal,
                        geodesic_distance=start.geodesic,
                        euclidean_distance=start.euclidean,
                        viewpoints=viewpoints,
                    )
                )
        except StartSamplingExhausted as exc:
            logger.warning("object %d (%s): %s; skipped", object_id, obj.category, exc)
            continue
        episodes.extend(object_episodes)

    return EpisodeDataset(
        split=split,
        episodes=tuple(episodes),
        provenance={
            "seed": seed,
            "scene_id": scene_id,
            "starts_per_instance": starts_per_instance,
            "tool_version": navforge.__version__,
        },
    )


# ---------------------------------------------------------------------------
# Serialization (docs/dataset_format.md)
# ---------------------------------------------------------------------------


def _camera_json(camera: GoalCamera) -> dict:
    return {
        "position": [float(v) for v in camera.position],
        "yaw": camera.yaw,
        "pitch": camera.pitch,
        "hfov": camera.hfov,
        "width": camera.width,
        "height": camera.height,
    }


def _camera_from_json(data: dict) -> GoalCamera:
    return GoalCamera(
        position=np.array(data["position"], dtype=np.float64),
        yaw=data["yaw"],
        pitch=data["pitch"],
        hfov=data["hfov"],
        width=data["width"],
        height=data["height"],
    )


def episode_to_json(episode: Episode) -> dict:
    return {
        "episode_id": episode.episode_id,
        "scene_id": episode.scene_id,
        "start": {
            "position": [float(v) for v in episode.start_position],
            "heading": episode.start_heading,
        },
        "goal": {
            "object_id": episode.goal.object_id,
            "category": episode.goal.category,
            "camera": _camera_json(episode.goal.camera),
            "frame_coverage": episode.goal.frame_coverage,
            "object_coverage": episode.goal.object_coverage,
            "osa": episode.goal.osa,
        },
        "geodesic_distance": episode.geodesic_distance,
        "euclidean_distance": episode.euclidean_distance,
        "viewpoints": [[float(v) for v in vp.position] for vp in episode.viewpoints],
    }


def episode_from_json(data: dict) -> Episode:
    goal = data["goal"]
    return Episode(
        episode_id=data["episode_id"],
        scene_id=data["scene_id"],
        start_position=np.array(data["start"]["position"], dtype=np.float64),
        start_heading=data["start"]["heading"],
        goal=ImageGoal(
            object_id=goal["object_id"],
            category=goal["category"],
            camera=_camera_from_json(goal["camera"]),
            frame_coverage=goal["frame_coverage"],
            object_coverage=goal["object_coverage"],
            osa=goal["osa"],
        ),
        geodesic_distance=data["geodesic_distance"],
        euclidean_distance=data["euclidean_distance"],
        viewpoints=tuple(
            Viewpoint(position=np.array(p, dtype=np.float64), object_id=goal["object_id"])
            for p in data["viewpoints"]
        ),
    )


def save_dataset(
    dataset: EpisodeDataset,
    directory: str | Path,
    *,
    scene: Scene | None = None,
    scene_file: str | Path | None = None,
) -> None:
    """Write manifest.json + episodes.jsonl (+ the scene, for a
    self-contained directory). Pass either the Scene or an existing file."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if scene is not None:
        save_scene(scene, directory / SCENE_FILE_NAME)
    elif scene_file is not None:
        shutil.copyfile(scene_file, directory / SCENE_FILE_NAME)
    manifest = {
        "format_version": DATASET_FORMAT_VERSION,
        "split": dataset.split,
        "episode_count": len(dataset.episodes),
        "scene_file": SCENE_FILE_NAME,
        "provenance": dataset.provenance,
    }
    (directory / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    with open(directory / "episodes.jsonl", "w", encoding="utf-8") as fh:
        for episode in dataset.episodes:
            fh.write(json.dumps(episode_to_json(episode)) + "\n")


def load_dataset(directory: str | Path) -> tuple[EpisodeDataset, Scene]:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text(encoding="utf-8"))
    if manifest["format_version"] != DATASET_FORMAT_VERSION:
        raise EpisodeError(f"unsupported dataset format {manifest['format_version']}")
    scene = load_scene(directory / manifest["scene_file"])
    episodes = []
    with open(directory / "episodes.jsonl", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                episodes.append(episode_from_json(json.loads(line)))
    ids = [ep.episode_id for ep in episodes]
    if len(set(ids)) != len(ids):
        raise EpisodeError("duplicate episode ids in dataset")
    dataset = EpisodeDataset(
        split=manifest["split"],
        episodes=tuple(episodes),
        provenance=manifest["provenance"],
    )
    return dataset, scene


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------


def _histogram(values, bins: int = 20) -> dict:
    values = np.asarray(values, dtype=np.float64)
    if len(values) == 0:
        return {"bin_edges": [], "counts": []}
    if float(values.min()) == float(values.max()):
        v = float(values.min())
        return {"bin_edges": [v, v + 1.0], "counts": [int(len(values))]}
    counts, edges = np.histogram(values, bins=bins)
    return {"bin_edges": [float(e) for e in edges], "counts": [int(c) for c in counts]}


def dataset_stats(dataset: EpisodeDataset) -> dict:
    """Distance distributions and per-category object/goal/episode counts."""
    euclid = [ep.euclidean_distance for ep in dataset.episodes]
    geo = [ep.geodesic_distance for ep in dataset.episodes]
    ratio = [g / e for g, e in zip(geo, euclid)]
    per_category: dict[str, dict] = {}
    objects_seen: dict[str, set] = {}
    goals_seen: dict[str, set] = {}
    for ep in dataset.episodes:
        cat = ep.category
        stats = per_category.setdefault(cat, {"objects": 0, "goals": 0, "episodes": 0})
        stats["episodes"] += 1
        objects_seen.setdefault(cat, set()).add(ep.object_id)
        cam = ep.goal.camera
        goals_seen.setdefault(cat, set()).add(
            (ep.object_id, tuple(float(v) for v in cam.position), cam.yaw, cam.hfov)
        )
    for cat in per_category:
        per_category[cat]["objects"] = len(objects_seen[cat])
        per_category[cat]["goals"] = len(goals_seen[cat])
    return {
        "split": dataset.split,
        "episodes": len(dataset.episodes),
        "per_category": dict(sorted(per_category.items())),
        "euclidean_m": _histogram(euclid),
        "geodesic_m": _histogram(geo),
        "ratio": _histogram(ratio),
        "ratio_min": float(min(ratio)) if ratio else None,
        "euclidean_mean": float(np.mean(euclid)) if euclid else None,
        "geodesic_mean": float(np.mean(geo)) if geo else None,
    }


def save_stats(stats: dict, json_path: str | Path, csv_path: str | Path | None = None) -> None:
    """Write the stats summary as JSON plus a plot-ready histogram CSV."""
    Path(json_path).write_text(
        json.dumps(stats, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    if csv_path is None:
        return
    lines = ["metric,bin_left,bin_right,count"]
    for metric in ("euclidean_m", "geodesic_m", "ratio"):
        hist = stats[metric]
        edges = hist["bin_edges"]
        for k, count in enumerate(hist["counts"]):
            lines.append(f"{metric},{edges[k]!r},{edges[k + 1]!r},{count}")
    Path(csv_path).write_text("\n".join(lines) + "\n", encoding="utf-8")
