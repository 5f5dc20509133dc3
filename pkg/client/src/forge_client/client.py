"""Blocking session client: connect, reset, step, with verified decoding.

Every image payload carries a SHA-256 of the raw array the server
encoded; decoding recomputes and compares it, so a constructed
Observation is guaranteed bitwise-identical to the server-side arrays.
Responses carry per-session sequence numbers; the session counts its own
requests and refuses replies that fall out of step.
"""

from __future__ import annotations

import base64
import dataclasses
import hashlib
import io
import json
import socket

import numpy as np
from PIL import Image

ACTIONS = ("MOVE_FORWARD", "TURN_LEFT", "TURN_RIGHT", "STOP")


class ProtocolError(Exception):
    """The server said something the protocol does not allow here."""


def _decode_rgb(blob: bytes) -> np.ndarray:
    return np.asarray(Image.open(io.BytesIO(blob)).convert("RGB"), dtype=np.uint8)


def _decode_u16(blob: bytes) -> np.ndarray:
    return np.asarray(Image.open(io.BytesIO(blob)), dtype=np.uint16)


def _verified(array: np.ndarray, expected_sha: str, what: str) -> np.ndarray:
    digest = hashlib.sha256(array.tobytes()).hexdigest()
    if digest != expected_sha:
        raise ProtocolError(f"{what}: decoded bytes do not match the server checksum")
    return array


@dataclasses.dataclass(frozen=True)
class Observation:
    gps: tuple[float, float]
    compass: float
    rgb: np.ndarray  # (480, 640, 3) uint8
    depth_mm: np.ndarray  # (480, 640) uint16 millimeters, 0 = miss
    sensor: dict

    @property
    def depth_m(self) -> np.ndarray:
        """Depth in meters (float64); 0 where the sensor saw nothing."""
        return self.depth_mm.astype(np.float64) / 1000.0


@dataclasses.dataclass(frozen=True)
class GoalSpec:
    """Issuer-frame goal: the image and the camera that took it."""

    image: np.ndarray  # (512, 512, 3) uint8
    camera: dict  # position/yaw/pitch/hfov/width/height


@dataclasses.dataclass(frozen=True)
class EpisodeResult:
    success: int
    spl: float
    shortest_path: float
    agent_path: float
    distance_to_goal_at_end: float
    forced_end: bool = False


def _parse_observation(payload: dict) -> Observation:
    rgb = _verified(
        _decode_rgb(base64.b64decode(payload["rgb_png"])), payload["rgb_sha256"], "rgb"
    )
    depth = _verified(
        _decode_u16(base64.b64decode(payload["depth_png"])),
        payload["depth_sha256"],
        "depth",
    )
    return Observation(
        gps=(payload["gps"][0], payload["gps"][1]),
        compass=payload["compass"],
        rgb=rgb,
        depth_mm=depth,
        sensor=dict(payload["sensor"]),
    )


def _parse_goal(payload: dict) -> GoalSpec:
    image = _verified(
        _decode_rgb(base64.b64decode(payload["image_png"])),
        payload["image_sha256"],
        "goal image",
    )
    return GoalSpec(image=image, camera=dict(payload["camera"]))


def _parse_result(payload: dict) -> EpisodeResult:
    return EpisodeResult(
        success=payload["success"],
        spl=payload["spl"],
        shortest_path=payload["shortest_path"],
        agent_path=payload["agent_path"],
        distance_to_goal_at_end=payload["distance_to_goal_at_end"],
        forced_end=payload.get("forced_end", False),
    )


class ClientSession:
    """One connection, one episode at a time. Not thread-safe; run one
    session per thread or process."""

    def __init__(self, sock: socket.socket):
        self._sock = sock
        self._wire = sock.makefile("rwb")
        self._seq = 0
        self.episode_id: str | None = None
        self.last_observation: Observation | None = None
        self.goal: GoalSpec | None = None

    def _rpc(self, request: dict) -> dict:
        self._wire.write((json.dumps(request) + "\n").encode("utf-8"))
        self._wire.flush()
        line = self._wire.readline()
        if not line:
            raise ProtocolError("server closed the connection")
        response = json.loads(line)
        self._seq += 1
        if response.get("seq") != self._seq:
            raise ProtocolError(
                f"sequence mismatch: sent request {self._seq}, reply says {response.get('seq')}"
            )
        if response.get("type") == "error":
            raise ProtocolError(response.get("error", "unspecified server error"))
        return response

    def reset(self, episode_id: str) -> tuple[Observation, GoalSpec]:
        """Start an episode; returns the first observation and the goal."""
        response = self._rpc({"type": "reset", "episode_id": episode_id})
        if response.get("type") != "observation" or "goal" not in response:
            raise ProtocolError(f"unexpected reset reply type {response.get('type')!r}")
        self.episode_id = episode_id
        self.last_observation = _parse_observation(response["observation"])
        self.goal = _parse_goal(response["goal"])
        return self.last_observation, self.goal

    def step(self, action: str) -> tuple[Observation, EpisodeResult | None]:
        """Apply one action; the result is non-None once the episode ends."""
        if action not in ACTIONS:
            raise ValueError(f"action must be one of {ACTIONS}")
        response = self._rpc({"type": "step", "action": action})
        if response.get("type") == "result":
            self.last_observation = _parse_observation(response["observation"])
            return self.last_observation, _parse_result(response["result"])
        if response.get("type") == "observation":
            self.last_observation = _parse_observation(response["observation"])
            return self.last_observation, None
        raise ProtocolError(f"unexpected step reply type {response.get('type')!r}")

    def goal_image(self) -> GoalSpec:
        response = self._rpc({"type": "goal_image"})
        if response.get("type") != "goal":
            raise ProtocolError(f"unexpected goal reply type {response.get('type')!r}")
        self.goal = _parse_goal(response["goal"])
        return self.goal

    def close(self) -> None:
        try:
            self._rpc({"type": "close"})
        except (ProtocolError, OSError):
            pass
        finally:
            try:
                self._sock.close()
            except OSError:
                pass

    def __enter__(self) -> "ClientSession":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def connect(host: str, port: int, timeout: float = 30.0) -> ClientSession:
    """Open a session against a running evaluation service."""
    sock = socket.create_connection((host, port), timeout=timeout)
    sock.settimeout(timeout)
    return ClientSession(sock)
