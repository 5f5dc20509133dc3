"""forge_client: blocking client for the forge evaluation service.

The service speaks newline-delimited JSON over TCP (one line per request,
one per response); this package handles framing, image decoding, and
integrity checks, and exposes episodic reset/step calls.
"""

from forge_client.client import (
    ClientSession,
    EpisodeResult,
    GoalSpec,
    Observation,
    ProtocolError,
    connect,
)

__version__ = "0.1.0"
