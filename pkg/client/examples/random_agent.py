"""Random-walk agent: the smallest possible service consumer.

    python examples/random_agent.py HOST PORT EPISODE_ID [EPISODE_ID...]

Each episode runs a seeded random policy until the server ends it (STOP
or step limit), then prints the result line the evaluator produced.
"""

import random
import sys

from forge_client import connect


def run_episode(session, episode_id: str, max_steps: int = 60) -> None:
    rng = random.Random(episode_id)
    observation, goal = session.reset(episode_id)
    print(f"{episode_id}: goal image {goal.image.shape}, start gps {observation.gps}")
    for _ in range(max_steps - 1):
        action = rng.choice(["MOVE_FORWARD", "MOVE_FORWARD", "TURN_LEFT", "TURN_RIGHT"])
        observation, result = session.step(action)
        if result is not None:
            print(f"{episode_id}: server ended the episode: {result}")
            return
    _, result = session.step("STOP")
    print(f"{episode_id}: success={result.success} spl={result.spl:.3f}")


def main() -> int:
    host, port, episodes = sys.argv[1], int(sys.argv[2]), sys.argv[3:]
    if not episodes:
        print("usage: random_agent.py HOST PORT EPISODE_ID...", file=sys.stderr)
        return 2
    with connect(host, port) as session:
        for episode_id in episodes:
            run_episode(session, episode_id)
    return 0


if __name__ == "__main__":
    sys.exit(main())
