"""Drive the simulator by hand, then let the oracle agent solve episodes.

Success requires an intentional STOP strictly within 0.1 m of a valid
viewpoint; path efficiency weights success by shortest/realized path
length. The oracle agent plans over the real discrete dynamics, so on a
well-formed dataset it scores success 1.0 at near-unit efficiency.

    python demos/05_simulate_and_score.py   (expects demos/04 ran first)
"""

from pathlib import Path

from navforge.episodes import load_dataset
from navforge.evaluation import batch_evaluate, evaluate, oracle_agent
from navforge.nav import build_occupancy
from navforge.sim import Action, reset, step

dataset_dir = Path(__file__).parent / "out" / "demo_dataset"
if not dataset_dir.exists():
    raise SystemExit("run demos/04_episodes_and_stats.py first")

dataset, scene = load_dataset(dataset_dir)
grid = build_occupancy(scene)
episode = dataset.episodes[0]

# Manual stepping: spin in place, then try to walk.
state, obs = reset(scene, grid, episode)
print(f"reset: gps={obs.gps}, compass={obs.compass}")
for action in (Action.TURN_LEFT, Action.TURN_LEFT, Action.MOVE_FORWARD):
    state, obs, done = step(state, action, scene, grid)
    print(f"{action.value:<12} -> gps=({obs.gps[0]:+.2f}, {obs.gps[1]:+.2f}) "
          f"compass={obs.compass:.2f} done={done}")

# The oracle solves every episode; batch_evaluate aggregates.
trajectories = [oracle_agent(ep, scene, grid) for ep in dataset.episodes]
single = evaluate(trajectories[0], episode, grid)
print(f"\nepisode {episode.episode_id}: success={single.success} spl={single.spl:.3f} "
      f"shortest={single.shortest_path:.2f} m realized={single.agent_path:.2f} m")

report = batch_evaluate(dataset, trajectories, grid=grid)
overall = report["overall"]
print(f"oracle over {overall['episodes']} episodes: "
      f"success={overall['success']:.3f} spl={overall['spl']:.3f}")
for category, row in report["per_category"].items():
    print(f"  {category:<7} success={row['success']:.2f} spl={row['spl']:.3f} n={row['episodes']}")
