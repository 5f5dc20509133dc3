from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings

from navforge.coverage import goals_for_scene
from navforge.episodes import generate_dataset
from navforge.nav import build_occupancy
from navforge.render import GoalCamera, render
from navforge.scene import generate_procedural_scene

settings.register_profile("slow-kernels", deadline=None, max_examples=25)
settings.load_profile("slow-kernels")


@pytest.fixture(scope="session")
def room_scene():
    """One furnished room; the cheapest realistic scene."""
    return generate_procedural_scene(1, 1, seed=9)


@pytest.fixture(scope="session")
def room_grid(room_scene):
    return build_occupancy(room_scene)


@pytest.fixture(scope="session")
def two_room_scene():
    return generate_procedural_scene(2, 2, seed=3)


@pytest.fixture(scope="session")
def two_room_grid(two_room_scene):
    return build_occupancy(two_room_scene)


@pytest.fixture(scope="session")
def room_goals(room_scene):
    return goals_for_scene(room_scene, seed=2)


@pytest.fixture(scope="session")
def room_dataset(room_scene, room_grid, room_goals):
    return generate_dataset(
        room_scene,
        room_goals,
        scene_id="room",
        seed=5,
        starts_per_instance=6,
        grid=room_grid,
    )


@pytest.fixture(scope="session")
def two_room_dataset(two_room_scene, two_room_grid, two_room_scene_goals):
    return generate_dataset(
        two_room_scene,
        two_room_scene_goals,
        scene_id="tworoom",
        seed=5,
        starts_per_instance=6,
        grid=two_room_grid,
    )


@pytest.fixture(scope="session")
def two_room_scene_goals(two_room_scene):
    return goals_for_scene(two_room_scene, seed=11)


@pytest.fixture(scope="session", autouse=True)
def warm_kernels(room_scene):
    """Compile the numba kernels once before any timing-sensitive test."""
    camera = GoalCamera(
        position=np.array([1.0, 1.0, 1.0]), yaw=0.3, pitch=0.0, hfov=1.2,
        width=8, height=8,
    )
    render(room_scene, camera)
