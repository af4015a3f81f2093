"""Deterministic random streams.

Every run has a single integer seed. All randomness (data generation, weight
init, dropout masks, sparse tap positions) is drawn from named sub-streams of
that seed so that e.g. resuming a run regenerates identical sparse positions.
Streams are backed by the counter-based Philox generator, whose bit stream is
stable across platforms and numpy versions.
"""

from __future__ import annotations

import hashlib

import numpy as np

STREAMS = ("data", "init", "dropout", "sparse", "shuffle", "bench")


def _key(seed: int, stream: str, index: int) -> int:
    raw = f"{seed}:{stream}:{index}".encode()
    return int.from_bytes(hashlib.sha256(raw).digest()[:16], "little")


def stream(seed: int, name: str, index: int = 0) -> np.random.Generator:
    """Generator for sub-stream `name` of `seed`; `index` splits a stream further."""
    return np.random.Generator(np.random.Philox(key=_key(seed, name, index)))


def derive(seed: int, tag: str) -> int:
    """Child seed for a named component, collision-free across tags."""
    return _key(seed, "derive:" + tag, 0) & (2**63 - 1)
