"""Occupancy grid, geodesic distances, and valid viewpoints.

Prints an ASCII map of the grid: '#' blocked, '.' free, 'v' viewpoint
cells of the chosen object, 'S'/'G' endpoints of a geodesic query.

    python demos/03_navigation.py
"""

import numpy as np

from navforge import generate_procedural_scene
from navforge.nav import (
    AgentBody,
    build_occupancy,
    compute_viewpoints,
    geodesic_distance,
    sample_standable,
)

scene = generate_procedural_scene(rooms=3, objects_per_room=2, seed=42)
body = AgentBody()
print(f"agent: cylinder r={body.radius} m, h={body.height} m, sensor at {body.sensor_height} m")

grid = build_occupancy(scene, body)
print(f"grid: {grid.shape[0]}x{grid.shape[1]} cells at {grid.cell_size} m, "
      f"{int(grid.free.sum())} free")

obj = scene.instances[2]
viewpoints = compute_viewpoints(scene, grid, obj, body)
print(f"object {obj.id} ({obj.category}): {len(viewpoints)} valid viewpoints")

start = sample_standable(grid, seed=5, n=1)[0]
goal = (viewpoints[0].position[0], viewpoints[0].position[2])
geo = geodesic_distance(grid, start, goal)
euclid = float(np.hypot(start[0] - goal[0], start[1] - goal[1]))
print(f"start {np.round(start, 2)} -> viewpoint {np.round(goal, 2)}:")
print(f"  geodesic {geo:.2f} m, euclidean {euclid:.2f} m, detour ratio {geo / euclid:.3f}")

vp_cells = {grid.cell_of((vp.position[0], vp.position[2])) for vp in viewpoints}
s_cell = grid.cell_of(start)
g_cell = grid.cell_of(goal)
rows = []
for j in reversed(range(0, grid.shape[1], 2)):  # 2x downsample for the terminal
    row = []
    for i in range(0, grid.shape[0], 2):
        cell = (i, j)
        if cell == s_cell:
            row.append("S")
        elif cell == g_cell:
            row.append("G")
        elif cell in vp_cells:
            row.append("v")
        else:
            row.append("." if grid.free[i, j] else "#")
    rows.append("".join(row))
print("\n".join(rows))
