"""Build a procedural scene, save it, and render a few views.

Run from the repository root:

    python demos/01_build_a_scene.py

Outputs land in demos/out/.
"""

import math
from pathlib import Path

import numpy as np

from navforge import generate_procedural_scene, render, save_scene
from navforge.images import write_depth_png, write_mask_png, write_rgb_png
from navforge.render import GoalCamera, shade

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

# Four connected rooms, two furniture proxies per room. Same seed, same scene.
scene = generate_procedural_scene(rooms=4, objects_per_room=2, seed=101)
print(f"scene: {len(scene.vertices)} vertices, {len(scene.triangles)} triangles")
print(f"bounds: {scene.bounds_min.round(2)} .. {scene.bounds_max.round(2)}")
for inst in scene.instances:
    print(
        f"  object {inst.id}: {inst.category:<7} centroid {inst.centroid.round(2)}"
        f" size {(inst.aabb_max - inst.aabb_min).round(2)}"
    )

save_scene(scene, out / "demo.forgescene")
print(f"\nsaved {out / 'demo.forgescene'}")

# A handful of cameras looking into the first room.
first = scene.instances[0]
for k, radius in enumerate((1.0, 2.0)):
    position = first.centroid + np.array([radius * math.cos(0.8), 0.0, radius * math.sin(0.8)])
    position[1] = 1.2
    look = first.centroid - position
    camera = GoalCamera(
        position=position,
        yaw=math.atan2(look[2], look[0]),
        pitch=math.atan2(look[1], math.hypot(look[0], look[2])),
        hfov=math.radians(79),
        width=512,
        height=512,
    )
    view = render(scene, camera)
    visible = np.count_nonzero(view.instance_mask == first.id) / view.instance_mask.size
    print(f"view {k}: {first.category} fills {visible:.1%} of the frame")
    write_rgb_png(out / f"view{k}.rgb.png", shade(view))
    write_depth_png(out / f"view{k}.depth.png", view.depth)
    write_mask_png(out / f"view{k}.mask.png", view.instance_mask)

print(f"wrote renders to {out}/view*.png")
