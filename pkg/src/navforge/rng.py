"""Deterministic RNG substreams derived from hashable labels.

Seeding via SHA-256 of a canonical key string keeps every consumer's
stream independent of evaluation order, so parallel generation cannot
change outputs.
"""

from __future__ import annotations

import hashlib

import numpy as np


def rng_for(*parts: int | str) -> np.random.Generator:
    """Generator seeded stably from the given key parts."""
    key = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    entropy = int.from_bytes(digest[:16], "little")
    return np.random.default_rng(np.random.SeedSequence(entropy))
