"""Run the evaluation service in-process and drive it over raw TCP.

Any language that can speak newline-delimited JSON over a socket can be
benchmarked this way; this script does it with nothing but the standard
library on the client side.

    python demos/06_serve_and_query.py   (expects demos/04 ran first)
"""

import base64
import hashlib
import json
import socket
from pathlib import Path

from navforge.episodes import load_dataset
from navforge.images import decode_png_rgb
from navforge.service import EvalService, start_server

dataset_dir = Path(__file__).parent / "out" / "demo_dataset"
if not dataset_dir.exists():
    raise SystemExit("run demos/04_episodes_and_stats.py first")

dataset, scene = load_dataset(dataset_dir)
results_log = Path(__file__).parent / "out" / "results.jsonl"
results_log.unlink(missing_ok=True)
service = EvalService(dataset, scene, results_path=results_log)
server = start_server(service)  # ephemeral port on localhost
host, port = server.server_address
print(f"serving {len(dataset.episodes)} episodes on {host}:{port}")

sock = socket.create_connection((host, port))
wire = sock.makefile("rwb")


def rpc(payload):
    wire.write((json.dumps(payload) + "\n").encode())
    wire.flush()
    return json.loads(wire.readline())


episode_id = dataset.episodes[0].episode_id
response = rpc({"type": "reset", "episode_id": episode_id})
obs = response["observation"]
print(f"reset {episode_id}: gps={obs['gps']} compass={obs['compass']}")

goal = response["goal"]
image = decode_png_rgb(base64.b64decode(goal["image_png"]))
checks = hashlib.sha256(image.tobytes()).hexdigest() == goal["image_sha256"]
print(f"goal image {image.shape}, lossless decode verified: {checks}")
print(f"goal camera hfov {goal['camera']['hfov']:.2f} rad at {goal['camera']['position']}")

for action in ("TURN_RIGHT", "MOVE_FORWARD", "MOVE_FORWARD", "STOP"):
    response = rpc({"type": "step", "action": action})
    if response["type"] == "result":
        print(f"episode over: {response['result']}")
        break
    print(f"{action:<12} gps={response['observation']['gps']}")

rpc({"type": "close"})
sock.close()
server.shutdown()
print(f"results appended to {results_log}")
