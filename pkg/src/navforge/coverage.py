"""Goal-image selection: radial candidate cameras, coverage scores, thresholds.

Candidates ring the target object at four radii and 36 bearings with
randomized height, look-at jitter, and field of view. Each render yields
two scores: frame coverage (fraction of pixels on the object) and object
coverage (convex-hull area of the view's point cloud over the hull area of
all views pooled, the observable surface area). Goals are the candidates
that clear both thresholds.
"""

from __future__ import annotations

import dataclasses
import functools
import math

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from navforge.rng import rng_for
from navforge.render import GOAL_RESOLUTION, GoalCamera, Render, points_near_geometry, render, unproject
from navforge.scene import ObjectInstance, Scene

CANDIDATE_RADII = (0.5, 1.0, 1.5, 2.0)
CANDIDATE_BEARING_STEP = math.radians(10.0)  # 36 bearings; 360 duplicates 0
CANDIDATE_HEIGHT_RANGE = (0.8, 1.5)
LOOK_JITTER = math.radians(5.0)
HFOV_RANGE = (math.radians(60.0), math.radians(120.0))
CAMERA_CLEARANCE = 0.05  # discard candidates this close to geometry


@dataclasses.dataclass(frozen=True)
class Thresholds:
    """Selection thresholds; defaults reproduce the benchmark constants."""

    min_object_coverage: float = 0.7
    frame_slope: float = 0.0232  # per m^2 of observable surface area
    frame_intercept: float = 0.02

    def min_frame_coverage(self, osa: float) -> float:
        return self.frame_slope * osa + self.frame_intercept


@dataclasses.dataclass(frozen=True)
class CoverageScores:
    frame_coverage: float  # fraction of pixels on the object, in [0, 1]
    object_coverage: float  # observed / observable hull area, clamped to [0, 1]


@dataclasses.dataclass(frozen=True)
class ImageGoal:
    """A selected goal view: issuer camera plus the scores that admitted it."""

    object_id: int
    category: str
    camera: GoalCamera
    frame_coverage: float
    object_coverage: float
    osa: float


@dataclasses.dataclass(frozen=True, eq=False)
class CandidateSet:
    """All surviving candidate views of one object, with pooled geometry."""

    object_id: int
    cameras: tuple[GoalCamera, ...]
    renders: tuple[Render, ...]
    osa: float  # observable surface area: hull area of all clouds pooled
    hull_vertices: np.ndarray  # hull vertices of the pooled cloud

    @functools.cached_property
    def clouds(self) -> tuple[np.ndarray, ...]:
        """Per-candidate object point clouds (unprojected mask pixels)."""
        return tuple(
            unproject(r, cam, self.object_id)
            for r, cam in zip(self.renders, self.cameras)
        )

    @property
    def reference_cloud(self) -> np.ndarray:
        """Union of every candidate's object point cloud."""
        clouds = [c for c in self.clouds if len(c)]
        if not clouds:
            return np.empty((0, 3))
        return np.concatenate(clouds, axis=0)


def hull_area(cloud: np.ndarray) -> float:
    """Surface area of the 3D convex hull of a point cloud.

    Degenerate clouds fall back gracefully: fewer than 3 points have zero
    area, and coplanar clouds count both faces of their planar hull (twice
    the 2D hull area in the best-fit plane).
    """
    cloud = np.asarray(cloud, dtype=np.float64).reshape(-1, 3)
    if len(cloud) < 3:
        return 0.0
    try:
        return float(ConvexHull(cloud).area)
    except QhullError:
        pass
    # Coplanar or collinear: project onto the best-fit plane.
    centered = cloud - cloud.mean(axis=0)
    _, singular, basis = np.linalg.svd(centered, full_matrices=False)
    if len(singular) < 2 or singular[1] <= 1e-12 * max(singular[0], 1e-30):
        return 0.0
    flat = centered @ basis[:2].T
    try:
        return 2.0 * float(ConvexHull(flat).volume)  # 2D hull "volume" is area
    except QhullError:
        return 0.0


def _hull_vertices(cloud: np.ndarray) -> np.ndarray:
    """Vertices of the convex hull (the whole cloud when degenerate)."""
    cloud = np.asarray(cloud, dtype=np.float64).reshape(-1, 3)
    if len(cloud) < 5:
        return cloud
    try:
        return cloud[ConvexHull(cloud).vertices]
    except QhullError:
        try:
            centered = cloud - cloud.mean(axis=0)
            _, _, basis = np.linalg.svd(centered, full_matrices=False)
            flat = centered @ basis[:2].T
            return cloud[ConvexHull(flat).vertices]
        except QhullError:
            return cloud


def _aim_at(position: np.ndarray, target: np.ndarray) -> tuple[float, float]:
    d = target - position
    yaw = math.atan2(d[2], d[0])
    pitch = math.atan2(d[1], math.hypot(d[0], d[2]))
    return yaw, pitch


def sample_candidates(
    scene: Scene,
    obj: ObjectInstance,
    seed: int,
    *,
    radii: tuple[float, ...] = CANDIDATE_RADII,
    resolution: int = GOAL_RESOLUTION,
) -> CandidateSet:
    """Render the radial candidate ring around one object.

    One candidate per (radius, bearing) cell aims at the object centroid
    from a uniform height above the object's support level, with small
    look-at jitter and a randomized field of view. Candidates whose camera
    origin is embedded in geometry (within 5 cm of a triangle) or outside
    the scene bounds are discarded before rendering. Deterministic per
    (scene, object, seed).
    """
    if len(scene.triangles_of(obj.id)) == 0:
        raise ValueError(f"object {obj.id} has no labeled triangles")
    rng = rng_for(seed, "goal-candidates", obj.id)
    floor_y = float(obj.aabb_min[1])  # support level under the object
    n_bearings = round(2.0 * math.pi / CANDIDATE_BEARING_STEP)

    cameras = []
    for radius in radii:
        for k in range(n_bearings):
            bearing = k * CANDIDATE_BEARING_STEP
            height = rng.uniform(*CANDIDATE_HEIGHT_RANGE)
            d_yaw = rng.uniform(-LOOK_JITTER, LOOK_JITTER)
            d_pitch = rng.uniform(-LOOK_JITTER, LOOK_JITTER)
            hfov = rng.uniform(*HFOV_RANGE)
            position = np.array(
                [
                    obj.centroid[0] + radius * math.cos(bearing),
                    floor_y + height,
                    obj.centroid[2] + radius * math.sin(bearing),
                ]
            )
            yaw, pitch = _aim_at(position, obj.centroid)
            cameras.append(
                GoalCamera(
                    position=position,
                    yaw=yaw + d_yaw,
                    pitch=pitch + d_pitch,
                    hfov=hfov,
                    width=resolution,
                    height=resolution,
                )
            )

    positions = np.array([c.position for c in cameras])
    inside_bounds = np.all(
        (positions >= scene.bounds_min) & (positions <= scene.bounds_max), axis=1
    )
    embedded = points_near_geometry(scene, positions, CAMERA_CLEARANCE)
    keep = inside_bounds & ~embedded
    cameras = [c for c, k in zip(cameras, keep) if k]

    renders = tuple(render(scene, cam) for cam in cameras)
    clouds = [unproject(r, cam, obj.id) for r, cam in zip(renders, cameras)]
    pooled = [_hull_vertices(c) for c in clouds if len(c)]
    if pooled:
        union_vertices = _hull_vertices(np.concatenate(pooled, axis=0))
        osa = hull_area(union_vertices)
    else:
        union_vertices = np.empty((0, 3))
        osa = 0.0
    return CandidateSet(
        object_id=obj.id,
        cameras=tuple(cameras),
        renders=renders,
        osa=osa,
        hull_vertices=union_vertices,
    )


def frame_coverage(rendered: Render, object_id: int) -> float:
    """Fraction of pixels whose instance mask equals ``object_id``."""
    total = rendered.instance_mask.size
    return float(np.count_nonzero(rendered.instance_mask == object_id)) / total


def object_coverage(candidate_cloud: np.ndarray, reference: CandidateSet) -> float:
    """Observed hull area over the observable surface area, clamped to [0, 1]."""
    if reference.osa <= 0.0:
        return 0.0
    ratio = hull_area(candidate_cloud) / reference.osa
    return float(min(max(ratio, 0.0), 1.0))


def score_candidates(candidates: CandidateSet) -> list[CoverageScores]:
    return [
        CoverageScores(
            frame_coverage=frame_coverage(r, candidates.object_id),
            object_coverage=object_coverage(cloud, candidates),
        )
        for r, cloud in zip(candidates.renders, candidates.clouds)
    ]


def select_goals(
    candidates: CandidateSet,
    thresholds: Thresholds = Thresholds(),
    *,
    category: str = "",
    scores: list[CoverageScores] | None = None,
) -> list[ImageGoal]:
    """Keep candidates that strictly clear both coverage thresholds.

    An empty result simply drops the object from the benchmark. Equality
    does not pass: a candidate at exactly the object-coverage threshold is
    rejected.
    """
    if scores is None:
        scores = score_candidates(candidates)
    min_cf = thresholds.min_frame_coverage(candidates.osa)
    goals = []
    for camera, score in zip(candidates.cameras, scores):
        if score.object_coverage > thresholds.min_object_coverage and (
            score.frame_coverage > min_cf
        ):
            goals.append(
                ImageGoal(
                    object_id=candidates.object_id,
                    category=category,
                    camera=camera,
                    frame_coverage=score.frame_coverage,
                    object_coverage=score.object_coverage,
                    osa=candidates.osa,
                )
            )
    return goals


def goals_for_scene(
    scene: Scene, seed: int, thresholds: Thresholds = Thresholds()
) -> list[ImageGoal]:
    """Run the full candidate/score/select pipeline over every instance."""
    goals = []
    for obj in scene.instances:
        candidates = sample_candidates(scene, obj, seed)
        goals.extend(select_goals(candidates, thresholds, category=obj.category))
    return goals
