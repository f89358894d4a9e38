"""Seeded random streams.

All randomness goes through numpy's Philox (a counter-based generator), so a
seed means the same thing on every platform and the stream state can be
captured in a checkpoint and restored exactly.
"""

from __future__ import annotations

import numpy as np

ALGORITHM = "philox"


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Generator for ``seed``; ``stream`` selects a disjoint substream (e.g. a worker id)."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(stream)])
    return np.random.Generator(np.random.Philox(ss))


def get_state(rng: np.random.Generator) -> dict:
    state = rng.bit_generator.state
    return {
        "bit_generator": state["bit_generator"],
        "counter": [int(x) for x in state["state"]["counter"]],
        "key": [int(x) for x in state["state"]["key"]],
        "buffer": [int(x) for x in state["buffer"]],
        "buffer_pos": int(state["buffer_pos"]),
        "has_uint32": int(state["has_uint32"]),
        "uinteger": int(state["uinteger"]),
    }


def set_state(rng: np.random.Generator, snapshot: dict) -> None:
    rng.bit_generator.state = {
        "bit_generator": snapshot["bit_generator"],
        "state": {
            "counter": np.array(snapshot["counter"], dtype=np.uint64),
            "key": np.array(snapshot["key"], dtype=np.uint64),
        },
        "buffer": np.array(snapshot["buffer"], dtype=np.uint64),
        "buffer_pos": snapshot["buffer_pos"],
        "has_uint32": snapshot["has_uint32"],
        "uinteger": snapshot["uinteger"],
    }


def restore_rng(snapshot: dict) -> np.random.Generator:
    rng = np.random.Generator(np.random.Philox())
    set_state(rng, snapshot)
    return rng
