"""Generate an episode dataset and its distance statistics.

Every start passes the rejection rules: a finite geodesic to the nearest
valid viewpoint, and a geodesic/euclidean detour ratio above 1.05. Image
goals are dealt round-robin, so per-goal episode counts differ by at most
one.

    python demos/04_episodes_and_stats.py
"""

from pathlib import Path

from navforge import generate_procedural_scene
from navforge.coverage import goals_for_scene
from navforge.episodes import dataset_stats, generate_dataset, save_dataset, save_stats
from navforge.nav import build_occupancy

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

scene = generate_procedural_scene(rooms=2, objects_per_room=1, seed=7)
grid = build_occupancy(scene)

print("selecting image goals (renders the candidate rings; ~1 min) ...")
goals = goals_for_scene(scene, seed=13)
print(f"goals: {len(goals)} across {len({g.object_id for g in goals})} objects")

dataset = generate_dataset(
    scene, goals, scene_id="demo", seed=3, starts_per_instance=10, grid=grid
)
print(f"episodes: {len(dataset.episodes)}")

stats = dataset_stats(dataset)
print(f"min detour ratio: {stats['ratio_min']:.4f} (must exceed 1.05)")
print(f"mean geodesic: {stats['geodesic_mean']:.2f} m, mean euclidean: {stats['euclidean_mean']:.2f} m")
for category, row in stats["per_category"].items():
    print(f"  {category:<7} objects={row['objects']} goals={row['goals']} episodes={row['episodes']}")

save_dataset(dataset, out / "demo_dataset", scene=scene)
save_stats(stats, out / "stats.json", out / "stats.csv")
print(f"wrote {out / 'demo_dataset'}, {out / 'stats.json'}, {out / 'stats.csv'}")
