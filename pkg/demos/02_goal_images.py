"""Select image goals for one object and inspect the coverage scores.

The candidate ring circles the object at four radii and 36 bearings with
randomized height, aim jitter, and field of view. Two scores decide which
views become goals: frame coverage (is the camera close enough?) and
object coverage (does this view show enough of the object's observable
surface?).

    python demos/02_goal_images.py
"""

from pathlib import Path

import numpy as np

from navforge import generate_procedural_scene, render
from navforge.coverage import Thresholds, sample_candidates, score_candidates, select_goals
from navforge.images import write_rgb_png
from navforge.render import shade

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

scene = generate_procedural_scene(rooms=2, objects_per_room=1, seed=7)
obj = scene.instances[0]
print(f"target: object {obj.id} ({obj.category})")

candidates = sample_candidates(scene, obj, seed=13)
print(f"candidates surviving the embedded-camera filter: {len(candidates.cameras)} / 144")
print(f"observable surface area (pooled hull): {candidates.osa:.3f} m^2")

scores = score_candidates(candidates)
thresholds = Thresholds()
cutoff = thresholds.min_frame_coverage(candidates.osa)
print(f"thresholds: object coverage > {thresholds.min_object_coverage}, "
      f"frame coverage > {cutoff:.4f}")

goals = select_goals(candidates, thresholds, category=obj.category)
print(f"selected goals: {len(goals)}")

print("\n radius-ish | frame cov | object cov | selected")
for camera, score in list(zip(candidates.cameras, scores))[:20]:
    r = float(np.hypot(*(camera.position[[0, 2]] - obj.centroid[[0, 2]])))
    picked = (
        score.object_coverage > thresholds.min_object_coverage
        and score.frame_coverage > cutoff
    )
    print(f"   {r:7.2f} m | {score.frame_coverage:9.3f} | {score.object_coverage:10.3f} | {'yes' if picked else 'no'}")

# A small gallery of accepted goal views.
for k, goal in enumerate(goals[:4]):
    write_rgb_png(out / f"goal{k}.png", shade(render(scene, goal.camera)))
print(f"\nwrote {min(4, len(goals))} goal images to {out}/goal*.png")
