"""Named, counter-indexed random streams derived from one master seed.

Each stream is ``SeedSequence(master, spawn_key=(stream_id, *counters))``, so
any sub-experiment can be regenerated without replaying the others.
"""

from __future__ import annotations

import numpy as np

STREAMS = {"graph": 0, "dynamics": 1, "pinch": 2, "matrix": 3, "noise": 4}


def stream(master: int, name: str, *counters: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(master), spawn_key=(STREAMS[name], *(int(c) for c in counters)))


def rng(master: int, name: str, *counters: int) -> np.random.Generator:
    return np.random.default_rng(stream(master, name, *counters))


def describe(master: int) -> dict:
    """Seed provenance echoed into outputs."""
    return {"master": int(master), "streams": dict(STREAMS), "splitter": "SeedSequence(master, spawn_key=(stream, *counters))"}
