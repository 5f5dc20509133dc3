import base64
import hashlib
import json
import socket
import threading

import numpy as np
import pytest

from navforge import images
from navforge.rng import rng_for
from navforge.service import EvalService, start_server


class _Client:
    def __init__(self, host, port):
        self.sock = socket.create_connection((host, port))
        self.file = self.sock.makefile("rwb")

    def send_raw(self, data: bytes):
        self.file.write(data)
        self.file.flush()
        return json.loads(self.file.readline())

    def rpc(self, payload: dict) -> dict:
        return self.send_raw((json.dumps(payload) + "\n").encode("utf-8"))

    def close(self):
        try:
            self.sock.close()
        except OSError:
            pass


@pytest.fixture(scope="module")
def service(room_scene, room_grid, room_dataset, tmp_path_factory):
    results = tmp_path_factory.mktemp("svc") / "results.jsonl"
    svc = EvalService(room_dataset, room_scene, grid=room_grid, results_path=results)
    server = start_server(svc)
    yield svc, server, results
    server.shutdown()


@pytest.fixture()
def client(service):
    _, server, _ = service
    c = _Client(*server.server_address)
    yield c
    c.close()


def test_reset_contract(service, room_dataset):
    _, server, _ = service
    c = _Client(*server.server_address)
    episode = room_dataset.episodes[0]
    r = c.rpc({"type": "reset", "episode_id": episode.episode_id})
    assert r["type"] == "observation" and r["seq"] == 1 and r["done"] is False
    obs = r["observation"]
    assert obs["gps"] == [0.0, 0.0] and obs["compass"] == 0.0
    assert obs["sensor"] == {
        "height": 1.31,
        "hfov": pytest.approx(np.deg2rad(58)),
        "width": 640,
        "height_px": 480,
    }
    rgb = images.decode_png_rgb(base64.b64decode(obs["rgb_png"]))
    assert rgb.shape == (480, 640, 3)
    assert hashlib.sha256(rgb.tobytes()).hexdigest() == obs["rgb_sha256"]
    depth = images.decode_png_u16(base64.b64decode(obs["depth_png"]))
    assert depth.shape == (480, 640) and depth.dtype == np.uint16
    assert hashlib.sha256(depth.tobytes()).hexdigest() == obs["depth_sha256"]
    goal = r["goal"]
    img = images.decode_png_rgb(base64.b64decode(goal["image_png"]))
    assert img.shape == (512, 512, 3)
    assert hashlib.sha256(img.tobytes()).hexdigest() == goal["image_sha256"]
    c.close()


def test_goal_payload_is_issuer_frame_only(client, room_dataset):
    episode = room_dataset.episodes[0]
    r = client.rpc({"type": "reset", "episode_id": episode.episode_id})
    goal = r["goal"]
    assert set(goal) == {"camera", "image_png", "image_sha256"}
    assert set(goal["camera"]) == {"position", "yaw", "pitch", "hfov", "width", "height"}
    blob = json.dumps(goal)
    # No viewpoint or object-position leakage anywhere in the payload.
    assert "viewpoint" not in blob and "object" not in blob
    g2 = client.rpc({"type": "goal_image"})
    assert g2["type"] == "goal" and g2["goal"]["image_sha256"] == goal["image_sha256"]


def test_immediate_stop_returns_result(client, room_dataset):
    episode = room_dataset.episodes[1]
    client.rpc({"type": "reset", "episode_id": episode.episode_id})
    r = client.rpc({"type": "step", "action": "STOP"})
    assert r["type"] == "result" and r["done"] is True
    assert set(r["result"]) >= {"success", "spl", "shortest_path", "agent_path"}
    # Stepping after the end is a protocol error, then reset recovers.
    err = client.rpc({"type": "step", "action": "STOP"})
    assert err["type"] == "error"
    again = client.rpc({"type": "reset", "episode_id": episode.episode_id})
    assert again["type"] == "observation"


def test_sequence_numbers_monotonic(client, room_dataset):
    episode = room_dataset.episodes[0]
    seqs = [
        client.rpc({"type": "reset", "episode_id": episode.episode_id})["seq"],
        client.rpc({"type": "step", "action": "TURN_LEFT"})["seq"],
        client.rpc({"type": "goal_image"})["seq"],
        client.rpc({"type": "step", "action": "MOVE_FORWARD"})["seq"],
    ]
    assert seqs == sorted(seqs) and len(set(seqs)) == len(seqs)


def test_error_responses_keep_session_alive(client, room_dataset):
    assert client.rpc({"type": "step", "action": "STOP"})["type"] == "error"  # no reset yet
    assert client.rpc({"type": "reset", "episode_id": "nope"})["type"] == "error"
    assert client.send_raw(b"this is not json\n")["type"] == "error"
    assert client.rpc({"type": "what"})["type"] == "error"
    ok = client.rpc({"type": "reset", "episode_id": room_dataset.episodes[0].episode_id})
    assert ok["type"] == "observation"
    bad = client.rpc({"type": "step", "action": "FLY"})
    assert bad["type"] == "error"
    assert client.rpc({"type": "close"})["type"] == "bye"


def test_step_limit_forces_unsuccessful_end(room_scene, room_grid, room_dataset):
    svc = EvalService(room_dataset, room_scene, grid=room_grid, step_limit=3)
    server = start_server(svc)
    try:
        c = _Client(*server.server_address)
        c.rpc({"type": "reset", "episode_id": room_dataset.episodes[0].episode_id})
        r = None
        for _ in range(3):
            r = c.rpc({"type": "step", "action": "TURN_LEFT"})
        assert r["type"] == "result" and r["result"]["forced_end"] is True
        assert r["result"]["success"] == 0 and r["result"]["spl"] == 0.0
        c.close()
    finally:
        server.shutdown()


def _scripted_actions(episode_id: str, n: int = 12) -> list[str]:
    rng = rng_for("policy", episode_id)
    pool = ["MOVE_FORWARD", "TURN_LEFT", "TURN_RIGHT"]
    actions = [pool[int(rng.integers(3))] for _ in range(n)]
    actions.append("STOP")
    return actions


def _run_episodes(host, port, episode_ids):
    results = {}
    c = _Client(host, port)
    for episode_id in episode_ids:
        r = c.rpc({"type": "reset", "episode_id": episode_id})
        assert r["type"] == "observation", r
        for action in _scripted_actions(episode_id):
            r = c.rpc({"type": "step", "action": action})
            assert r["type"] in ("observation", "result"), r
        assert r["type"] == "result"
        results[episode_id] = r["result"]
    c.rpc({"type": "close"})
    c.close()
    return results


def test_concurrent_sessions_match_sequential(service, room_dataset):
    _, server, _ = service
    host, port = server.server_address
    ids = [ep.episode_id for ep in room_dataset.episodes]
    sequential = _run_episodes(host, port, ids)

    half = len(ids) // 2
    groups = [ids[:half], ids[half:]]
    out: list[dict] = [None, None]
    threads = [
        threading.Thread(target=lambda k=k: out.__setitem__(k, _run_episodes(host, port, groups[k])))
        for k in range(2)
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    concurrent = {**out[0], **out[1]}
    assert concurrent == sequential


def test_results_log_appends(service, room_dataset):
    svc, server, results_path = service
    before = (
        len(results_path.read_text().strip().splitlines())
        if results_path.exists()
        else 0
    )
    c = _Client(*server.server_address)
    c.rpc({"type": "reset", "episode_id": room_dataset.episodes[0].episode_id})
    r = c.rpc({"type": "step", "action": "STOP"})
    assert r["type"] == "result"
    c.close()
    lines = results_path.read_text().strip().splitlines()
    assert len(lines) == before + 1
    record = json.loads(lines[-1])
    assert record["episode_id"] == room_dataset.episodes[0].episode_id
    assert {"success", "spl", "shortest_path"} <= set(record)
