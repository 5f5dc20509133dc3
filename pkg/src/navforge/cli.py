"""forge: command-line front end for the benchmark toolkit.

Subcommands cover the full lifecycle: scene generation, rendering, goal
selection, navigability, viewpoints, episode generation, statistics,
trajectory evaluation, serving, and replay. Angles on the command line are
degrees; library APIs use radians.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

import navforge
from navforge import images
from navforge.coverage import ImageGoal, Thresholds, goals_for_scene
from navforge.episodes import (
    dataset_stats,
    generate_dataset,
    load_dataset,
    save_dataset,
    save_stats,
)
from navforge.evaluation import (
    batch_evaluate,
    evaluate,
    load_trajectories,
    oracle_agent,
    replay_actions,
    save_trajectories,
)
from navforge.nav import AgentBody, build_occupancy, compute_viewpoints, save_grid
from navforge.render import GoalCamera, render, shade
from navforge.scene import generate_procedural_scene, load_scene, save_scene
from navforge.service import serve_dataset


def _parse_camera(spec: str) -> GoalCamera:
    """Parse "x,y,z,yaw,pitch,hfov,WxH" with angles in degrees."""
    parts = spec.split(",")
    if len(parts) != 7 or "x" not in parts[6]:
        raise argparse.ArgumentTypeError(
            "camera must be x,y,z,yaw,pitch,hfov,WxH (angles in degrees)"
        )
    w, h = parts[6].lower().split("x")
    return GoalCamera(
        position=np.array([float(parts[0]), float(parts[1]), float(parts[2])]),
        yaw=math.radians(float(parts[3])),
        pitch=math.radians(float(parts[4])),
        hfov=math.radians(float(parts[5])),
        width=int(w),
        height=int(h),
    )


def _goal_json(goal: ImageGoal) -> dict:
    camera = goal.camera
    return {
        "object_id": goal.object_id,
        "category": goal.category,
        "camera": {
            "position": [float(v) for v in camera.position],
            "yaw": camera.yaw,
            "pitch": camera.pitch,
            "hfov": camera.hfov,
            "width": camera.width,
            "height": camera.height,
        },
        "frame_coverage": goal.frame_coverage,
        "object_coverage": goal.object_coverage,
        "osa": goal.osa,
    }


def _goal_from_json(data: dict) -> ImageGoal:
    cam = data["camera"]
    return ImageGoal(
        object_id=data["object_id"],
        category=data["category"],
        camera=GoalCamera(
            position=np.array(cam["position"], dtype=np.float64),
            yaw=cam["yaw"],
            pitch=cam["pitch"],
            hfov=cam["hfov"],
            width=cam["width"],
            height=cam["height"],
        ),
        frame_coverage=data["frame_coverage"],
        object_coverage=data["object_coverage"],
        osa=data["osa"],
    )


def cmd_scene_gen(args) -> int:
    scene = generate_procedural_scene(args.rooms, args.objects, args.seed)
    save_scene(scene, args.out)
    print(
        f"wrote {args.out}: {len(scene.vertices)} vertices, "
        f"{len(scene.triangles)} triangles, {len(scene.instances)} objects"
    )
    return 0


def cmd_render(args) -> int:
    scene = load_scene(args.scene)
    rendered = render(scene, args.camera)
    prefix = Path(args.out)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    if args.depth_format == "pfm":
        depth_path = f"{prefix}.depth.pfm"
        images.write_pfm(depth_path, rendered.depth)
    else:
        depth_path = f"{prefix}.depth.png"
        images.write_depth_png(depth_path, rendered.depth)
    images.write_mask_png(f"{prefix}.mask.png", rendered.instance_mask)
    images.write_rgb_png(f"{prefix}.rgb.png", shade(rendered))
    print(f"wrote {depth_path}, {prefix}.mask.png, {prefix}.rgb.png")
    return 0


def cmd_goals(args) -> int:
    scene = load_scene(args.scene)
    thresholds = Thresholds(
        min_object_coverage=args.min_object_coverage,
        frame_slope=args.frame_slope,
        frame_intercept=args.frame_intercept,
    )
    goals = goals_for_scene(scene, seed=args.seed, thresholds=thresholds)
    with open(args.out, "w", encoding="utf-8") as fh:
        for goal in goals:
            fh.write(json.dumps(_goal_json(goal)) + "\n")
    objects = len({g.object_id for g in goals})
    print(f"wrote {args.out}: {len(goals)} goals across {objects} objects")
    return 0


def cmd_nav(args) -> int:
    scene = load_scene(args.scene)
    grid = build_occupancy(scene, AgentBody(), args.cell_size)
    save_grid(grid, args.out)
    print(f"wrote {args.out}: {grid.shape[0]}x{grid.shape[1]} cells, {int(grid.free.sum())} free")
    return 0


def cmd_viewpoints(args) -> int:
    scene = load_scene(args.scene)
    grid = build_occupancy(scene)
    obj = scene.instance(args.object)
    viewpoints = compute_viewpoints(scene, grid, obj)
    payload = [[float(v) for v in vp.position] for vp in viewpoints]
    text = json.dumps(payload, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        print(f"wrote {args.out}: {len(payload)} viewpoints")
    else:
        print(text)
    return 0


def cmd_generate(args) -> int:
    scene = load_scene(args.scene)
    if args.goals:
        goals = []
        with open(args.goals, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    goals.append(_goal_from_json(json.loads(line)))
    else:
        goals = goals_for_scene(scene, seed=args.seed)
    scene_id = args.scene_id or Path(args.scene).stem
    dataset = generate_dataset(
        scene,
        goals,
        scene_id=scene_id,
        seed=args.seed,
        starts_per_instance=args.starts_per_instance,
        split=args.split,
    )
    save_dataset(dataset, args.out, scene_file=args.scene)
    print(f"wrote {args.out}: {len(dataset.episodes)} episodes ({dataset.split})")
    return 0


def cmd_stats(args) -> int:
    dataset, _scene = load_dataset(args.dataset)
    stats = dataset_stats(dataset)
    save_stats(stats, args.out, args.csv)
    extra = f" and {args.csv}" if args.csv else ""
    print(f"wrote {args.out}{extra}: {stats['episodes']} episodes, min ratio {stats['ratio_min']}")
    return 0


def cmd_eval(args) -> int:
    dataset, scene = load_dataset(args.dataset)
    grid = build_occupancy(scene)
    episode_index = {ep.episode_id: ep for ep in dataset.episodes}
    trajectories = []
    for episode_id, actions in load_trajectories(args.trajectories):
        episode = episode_index.get(episode_id)
        if episode is None:
            print(f"warning: unknown episode {episode_id!r}, skipped", file=sys.stderr)
            continue
        trajectories.append(
            replay_actions(episode, actions, scene, grid, allow_sliding=args.allow_sliding)
        )
    report = batch_evaluate(dataset, trajectories, grid=grid)
    Path(args.out).write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    overall = report["overall"]
    print(
        f"wrote {args.out}: success {overall['success']:.3f}, spl {overall['spl']:.3f} "
        f"over {overall['episodes']} episodes"
    )
    return 0


def cmd_oracle(args) -> int:
    dataset, scene = load_dataset(args.dataset)
    grid = build_occupancy(scene)
    trajectories = [oracle_agent(ep, scene, grid) for ep in dataset.episodes]
    save_trajectories(trajectories, args.out)
    print(f"wrote {args.out}: {len(trajectories)} oracle trajectories")
    return 0


def cmd_replay(args) -> int:
    dataset, scene = load_dataset(args.dataset)
    grid = build_occupancy(scene)
    episode = dataset.episode(args.episode)
    wanted = None
    for episode_id, actions in load_trajectories(args.actions):
        if episode_id == args.episode:
            wanted = actions
            break
    if wanted is None:
        print(f"no actions for episode {args.episode!r} in {args.actions}", file=sys.stderr)
        return 1
    trajectory = replay_actions(
        episode, wanted, scene, grid, allow_sliding=args.allow_sliding
    )
    result = evaluate(trajectory, episode, grid)
    print(json.dumps({"episode_id": args.episode, **result.to_json()}, indent=2))
    return 0


def cmd_serve(args) -> int:
    serve_dataset(
        args.dataset, args.bind, args.results, allow_sliding=args.allow_sliding
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="forge",
        description="Build and score instance image-goal navigation benchmarks.",
    )
    parser.add_argument("--version", action="version", version=navforge.__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    scene = sub.add_parser("scene", help="scene utilities")
    scene_sub = scene.add_subparsers(dest="scene_command", required=True)
    gen = scene_sub.add_parser("gen", help="generate a procedural scene")
    gen.add_argument("--rooms", type=int, required=True)
    gen.add_argument("--objects", type=int, required=True, help="objects per room")
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=cmd_scene_gen)

    rend = sub.add_parser("render", help="render depth/mask/rgb from a camera")
    rend.add_argument("--scene", required=True)
    rend.add_argument(
        "--camera",
        type=_parse_camera,
        required=True,
        metavar="x,y,z,yaw,pitch,hfov,WxH",
        help="pose and intrinsics; angles in degrees",
    )
    rend.add_argument("--out", required=True, help="output path prefix")
    rend.add_argument("--depth-format", choices=("pfm", "png"), default="pfm")
    rend.set_defaults(func=cmd_render)

    goals = sub.add_parser("goals", help="select image goals for every object")
    goals.add_argument("--scene", required=True)
    goals.add_argument("--seed", type=int, required=True)
    goals.add_argument("--out", required=True)
    goals.add_argument("--min-object-coverage", type=float, default=Thresholds.min_object_coverage)
    goals.add_argument("--frame-slope", type=float, default=Thresholds.frame_slope)
    goals.add_argument("--frame-intercept", type=float, default=Thresholds.frame_intercept)
    goals.set_defaults(func=cmd_goals)

    nav = sub.add_parser("nav", help="build and save the occupancy grid")
    nav.add_argument("--scene", required=True)
    nav.add_argument("--out", required=True)
    nav.add_argument("--cell-size", type=float, default=0.05)
    nav.set_defaults(func=cmd_nav)

    vps = sub.add_parser("viewpoints", help="valid viewpoints of one object")
    vps.add_argument("--scene", required=True)
    vps.add_argument("--object", type=int, required=True)
    vps.add_argument("--out")
    vps.set_defaults(func=cmd_viewpoints)

    generate = sub.add_parser("generate", help="generate an episode dataset")
    generate.add_argument("--scene", required=True)
    generate.add_argument("--seed", type=int, required=True)
    generate.add_argument("--starts-per-instance", type=int, default=20)
    generate.add_argument("--goals", help="goals.jsonl from `forge goals` (recomputed when absent)")
    generate.add_argument("--split", default="train")
    generate.add_argument("--scene-id", help="defaults to the scene file stem")
    generate.add_argument("--out", required=True, help="output dataset directory")
    generate.set_defaults(func=cmd_generate)

    stats = sub.add_parser("stats", help="dataset distance/category statistics")
    stats.add_argument("--dataset", required=True)
    stats.add_argument("--out", required=True)
    stats.add_argument("--csv", help="also write plot-ready histogram CSV")
    stats.set_defaults(func=cmd_stats)

    ev = sub.add_parser("eval", help="score trajectories against a dataset")
    ev.add_argument("--dataset", required=True)
    ev.add_argument("--trajectories", required=True, help="JSONL of {episode_id, actions}")
    ev.add_argument("--out", required=True)
    ev.add_argument("--allow-sliding", action="store_true",
                    help="ablation: project blocked forwards along free axes")
    ev.set_defaults(func=cmd_eval)

    oracle = sub.add_parser("oracle", help="run the shortest-path oracle agent")
    oracle.add_argument("--dataset", required=True)
    oracle.add_argument("--out", required=True, help="trajectory JSONL output")
    oracle.set_defaults(func=cmd_oracle)

    replay = sub.add_parser("replay", help="replay one episode's actions and score it")
    replay.add_argument("--dataset", required=True)
    replay.add_argument("--episode", required=True)
    replay.add_argument("--actions", required=True, help="trajectory JSONL")
    replay.add_argument("--allow-sliding", action="store_true",
                        help="ablation: project blocked forwards along free axes")
    replay.set_defaults(func=cmd_replay)

    serve = sub.add_parser("serve", help="run the TCP evaluation service")
    serve.add_argument("--dataset", required=True)
    serve.add_argument("--bind", default="127.0.0.1:7447")
    serve.add_argument("--results", help="append-only results JSONL")
    serve.add_argument("--allow-sliding", action="store_true",
                       help="ablation: project blocked forwards along free axes")
    serve.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
