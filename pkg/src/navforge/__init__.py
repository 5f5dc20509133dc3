"""navforge: build and score instance image-goal navigation benchmarks.

The toolkit covers the whole benchmark lifecycle on any labeled triangle
mesh: procedural test scenes, goal-image selection by coverage heuristics,
occupancy-grid navigability, a discrete-action embodied simulator, episode
dataset generation, trajectory scoring, and a TCP evaluation service.
"""

__version__ = "0.1.0"

from navforge.scene import (
    CATEGORIES,
    ObjectInstance,
    Scene,
    generate_procedural_scene,
    load_scene,
    save_scene,
)
from navforge.render import GoalCamera, Render, line_of_sight, render, unproject
from navforge.coverage import (
    CandidateSet,
    CoverageScores,
    ImageGoal,
    Thresholds,
    frame_coverage,
    goals_for_scene,
    hull_area,
    object_coverage,
    sample_candidates,
    select_goals,
)
from navforge.nav import (
    AgentBody,
    OccupancyGrid,
    Viewpoint,
    build_occupancy,
    compute_viewpoints,
    geodesic_distance,
    sample_standable,
)
from navforge.sim import Action, AgentState, Observation, reset, step
from navforge.episodes import (
    Episode,
    EpisodeDataset,
    dataset_stats,
    generate_dataset,
    load_dataset,
    save_dataset,
)
from navforge.evaluation import (
    EvalResult,
    Trajectory,
    batch_evaluate,
    evaluate,
    oracle_agent,
)
