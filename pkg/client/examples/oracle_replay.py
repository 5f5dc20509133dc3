"""Replay pre-computed action sequences (e.g. from `forge oracle`) through
the live service and report the scores it returns.

    python examples/oracle_replay.py HOST PORT trajectories.jsonl

The JSONL file holds one {"episode_id": ..., "actions": [...]} per line,
the same interchange `forge eval` consumes.
"""

import json
import sys

from forge_client import connect


def main() -> int:
    host, port, path = sys.argv[1], int(sys.argv[2]), sys.argv[3]
    total = 0
    successes = 0
    spl_sum = 0.0
    with connect(host, port) as session, open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            session.reset(record["episode_id"])
            result = None
            for action in record["actions"]:
                _, result = session.step(action)
                if result is not None:
                    break
            if result is None:  # trajectory file had no terminal STOP
                _, result = session.step("STOP")
            total += 1
            successes += result.success
            spl_sum += result.spl
            print(f"{record['episode_id']}: success={result.success} spl={result.spl:.3f}")
    if total:
        print(f"\n{total} episodes: success {successes / total:.3f}, spl {spl_sum / total:.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
