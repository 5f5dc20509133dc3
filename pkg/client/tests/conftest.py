from __future__ import annotations

import json
import socket
import subprocess
import sys
import time
from pathlib import Path

import pytest


def _free_port() -> int:
    probe = socket.socket()
    probe.bind(("127.0.0.1", 0))
    port = probe.getsockname()[1]
    probe.close()
    return port


@pytest.fixture(scope="session")
def dataset_dir(tmp_path_factory) -> Path:
    """A small real dataset built through the forge CLI (10 episodes)."""
    root = tmp_path_factory.mktemp("client-ds")
    scene = root / "scene.forgescene"
    dataset = root / "dataset"
    subprocess.run(
        ["forge", "scene", "gen", "--rooms", "1", "--objects", "1", "--seed", "9",
         "--out", str(scene)],
        check=True, capture_output=True, text=True,
    )
    subprocess.run(
        ["forge", "generate", "--scene", str(scene), "--seed", "5",
         "--starts-per-instance", "10", "--out", str(dataset)],
        check=True, capture_output=True, text=True, timeout=1200,
    )
    return dataset


@pytest.fixture(scope="session")
def episode_ids(dataset_dir) -> list[str]:
    ids = []
    with open(dataset_dir / "episodes.jsonl", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                ids.append(json.loads(line)["episode_id"])
    assert len(ids) == 10
    return ids


@pytest.fixture(scope="session")
def server(dataset_dir, tmp_path_factory):
    """A live `forge serve` process; yields (host, port, results_path)."""
    port = _free_port()
    results = tmp_path_factory.mktemp("client-results") / "results.jsonl"
    proc = subprocess.Popen(
        ["forge", "serve", "--dataset", str(dataset_dir),
         "--bind", f"127.0.0.1:{port}", "--results", str(results)],
        stdout=subprocess.DEVNULL,
        stderr=subprocess.DEVNULL,
    )
    deadline = time.monotonic() + 180
    last_error = None
    while time.monotonic() < deadline:
        if proc.poll() is not None:
            raise RuntimeError(f"forge serve exited early with {proc.returncode}")
        try:
            socket.create_connection(("127.0.0.1", port), timeout=1).close()
            break
        except OSError as exc:
            last_error = exc
            time.sleep(0.25)
    else:
        proc.terminate()
        raise RuntimeError(f"forge serve never came up: {last_error}")
    yield "127.0.0.1", port, results
    proc.terminate()
    try:
        proc.wait(timeout=10)
    except subprocess.TimeoutExpired:
        proc.kill()


if sys.platform.startswith("win"):  # sockets/timeouts assume POSIX here
    collect_ignore_glob = ["*"]
