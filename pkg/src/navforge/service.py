"""Line-oriented TCP evaluation service for out-of-process agents.

One connection is one simulator session running one episode at a time.
Requests and responses are single-line UTF-8 JSON; images travel as
base64 PNG with SHA-256 checksums of the raw arrays so clients can verify
lossless decode. The goal payload carries only issuer-frame data (goal
image + goal camera), never the object's position or viewpoints. Episode
results append to a JSONL log under a lock; concurrent sessions share the
immutable scene/grid/dataset and nothing else.

Protocol reference: docs/protocol.md.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import socketserver
import threading
from pathlib import Path

from navforge import images
from navforge.episodes import Episode, EpisodeDataset, load_dataset
from navforge.evaluation import Trajectory, evaluate
from navforge.nav import AgentBody, OccupancyGrid, build_occupancy
from navforge.render import render, shade
from navforge.scene import Scene
from navforge.sim import DEFAULT_STEP_LIMIT, Action, reset, step

logger = logging.getLogger(__name__)

PROTOCOL_VERSION = 1


def _b64(blob: bytes) -> str:
    return base64.b64encode(blob).decode("ascii")


def _sha256(raw: bytes) -> str:
    return hashlib.sha256(raw).hexdigest()


class EvalService:
    """Shared immutable state plus the per-connection session factory."""

    def __init__(
        self,
        dataset: EpisodeDataset,
        scene: Scene,
        *,
        grid: OccupancyGrid | None = None,
        body: AgentBody = AgentBody(),
        results_path: str | Path | None = None,
        step_limit: int = DEFAULT_STEP_LIMIT,
        allow_sliding: bool = False,
    ):
        self.dataset = dataset
        self.scene = scene
        self.body = body
        self.grid = grid if grid is not None else build_occupancy(scene, body)
        self.step_limit = step_limit
        self.allow_sliding = allow_sliding
        self.episodes = {ep.episode_id: ep for ep in dataset.episodes}
        self._results_path = Path(results_path) if results_path else None
        self._results_lock = threading.Lock()
        self._goal_cache: dict[str, dict] = {}
        self._goal_lock = threading.Lock()

    def log_result(self, episode_id: str, result_json: dict) -> None:
        if self._results_path is None:
            return
        line = json.dumps({"episode_id": episode_id, **result_json})
        with self._results_lock:
            with open(self._results_path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")

    def goal_payload(self, episode: Episode) -> dict:
        with self._goal_lock:
            cached = self._goal_cache.get(episode.episode_id)
        if cached is not None:
            return cached
        goal_render = render(self.scene, episode.goal.camera)
        rgb = shade(goal_render)
        camera = episode.goal.camera
        payload = {
            "camera": {
                "position": [float(v) for v in camera.position],
                "yaw": camera.yaw,
                "pitch": camera.pitch,
                "hfov": camera.hfov,
                "width": camera.width,
                "height": camera.height,
            },
            "image_png": _b64(images.encode_png_rgb(rgb)),
            "image_sha256": _sha256(rgb.tobytes()),
        }
        with self._goal_lock:
            self._goal_cache[episode.episode_id] = payload
        return payload

    def observation_payload(self, obs) -> dict:
        rgb = obs.rgb
        depth_mm = images.depth_to_millimeters(obs.depth)
        return {
            "gps": [float(obs.gps[0]), float(obs.gps[1])],
            "compass": float(obs.compass),
            "sensor": {
                "height": obs.sensor.height,
                "hfov": obs.sensor.hfov,
                "width": obs.sensor.width,
                "height_px": obs.sensor.height_px,
            },
            "rgb_png": _b64(images.encode_png_rgb(rgb)),
            "rgb_sha256": _sha256(rgb.tobytes()),
            "depth_png": _b64(images.encode_png_u16(depth_mm)),
            "depth_sha256": _sha256(depth_mm.tobytes()),
        }


class _Session:
    """Per-connection episode state machine."""

    def __init__(self, service: EvalService):
        self.service = service
        self.episode: Episode | None = None
        self.state = None
        self.actions: list[Action] = []
        self.poses: list = []
        self.done = False

    def handle(self, request: dict) -> dict:
        kind = request.get("type")
        if kind == "reset":
            return self.on_reset(request)
        if kind == "step":
            return self.on_step(request)
        if kind == "goal_image":
            return self.on_goal()
        if kind == "close":
            return {"type": "bye"}
        return {"type": "error", "error": f"unknown request type {kind!r}"}

    def on_reset(self, request: dict) -> dict:
        episode_id = request.get("episode_id")
        episode = self.service.episodes.get(episode_id)
        if episode is None:
            return {"type": "error", "error": f"unknown episode_id {episode_id!r}"}
        self.episode = episode
        self.state, obs = reset(
            self.service.scene, self.service.grid, episode, self.service.body
        )
        self.actions = []
        self.poses = [(self.state.position.copy(), self.state.heading)]
        self.done = False
        return {
            "type": "observation",
            "episode_id": episode_id,
            "observation": self.service.observation_payload(obs),
            "goal": self.service.goal_payload(episode),
            "done": False,
        }

    def on_goal(self) -> dict:
        if self.episode is None:
            return {"type": "error", "error": "no active episode; reset first"}
        return {"type": "goal", "goal": self.service.goal_payload(self.episode)}

    def on_step(self, request: dict) -> dict:
        if self.episode is None:
            return {"type": "error", "error": "no active episode; reset first"}
        if self.done:
            return {"type": "error", "error": "episode finished; reset to continue"}
        try:
            action = Action(request.get("action"))
        except ValueError:
            return {"type": "error", "error": f"unknown action {request.get('action')!r}"}
        self.state, obs, self.done = step(
            self.state, action, self.service.scene, self.service.grid,
            self.service.body, allow_sliding=self.service.allow_sliding,
        )
        self.actions.append(action)
        self.poses.append((self.state.position.copy(), self.state.heading))
        forced = not self.done and len(self.actions) >= self.service.step_limit
        if self.done or forced:
            trajectory = Trajectory(
                episode_id=self.episode.episode_id,
                actions=tuple(self.actions),
                poses=tuple(self.poses),
                ended_with_stop=self.done,
            )
            result = evaluate(trajectory, self.episode, self.service.grid).to_json()
            if forced:
                result["forced_end"] = True
                self.done = True
            self.service.log_result(self.episode.episode_id, result)
            return {
                "type": "result",
                "episode_id": self.episode.episode_id,
                "result": result,
                "observation": self.service.observation_payload(obs),
                "done": True,
            }
        return {
            "type": "observation",
            "episode_id": self.episode.episode_id,
            "observation": self.service.observation_payload(obs),
            "done": False,
        }


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        service: EvalService = self.server.service  # type: ignore[attr-defined]
        session = _Session(service)
        seq = 0
        while True:
            line = self.rfile.readline()
            if not line:
                return
            if not line.strip():
                continue
            seq += 1
            try:
                request = json.loads(line)
                if not isinstance(request, dict):
                    raise ValueError("request must be a JSON object")
                response = session.handle(request)
            except (json.JSONDecodeError, ValueError) as exc:
                response = {"type": "error", "error": f"malformed request: {exc}"}
            except Exception:  # protocol totality: never crash the session
                logger.exception("internal error handling request")
                response = {"type": "error", "error": "internal error"}
            response["seq"] = seq
            self.wfile.write((json.dumps(response) + "\n").encode("utf-8"))
            self.wfile.flush()
            if response.get("type") == "bye":
                return


class _Server(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True


def start_server(service: EvalService, host: str = "127.0.0.1", port: int = 0) -> _Server:
    """Bind and serve on a background thread; caller owns shutdown().

    Port 0 picks an ephemeral port; read it from server.server_address.
    """
    server = _Server((host, port), _Handler)
    server.service = service  # type: ignore[attr-defined]
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server


def serve_dataset(
    dataset_dir: str | Path,
    bind: str,
    results_path: str | Path | None = None,
    *,
    allow_sliding: bool = False,
) -> None:
    """Blocking entry point used by the CLI: load, bind, serve forever."""
    dataset, scene = load_dataset(dataset_dir)
    service = EvalService(
        dataset, scene, results_path=results_path, allow_sliding=allow_sliding
    )
    host, _, port = bind.rpartition(":")
    server = _Server((host or "127.0.0.1", int(port)), _Handler)
    server.service = service  # type: ignore[attr-defined]
    logger.info("serving %d episodes on %s", len(dataset.episodes), bind)
    server.serve_forever()
