"""Deterministic RNG plumbing.

All randomness flows from a u64 master seed through named substreams, each a
counter-based Philox generator keyed by BLAKE2b(master seed, task labels).
Substreams are independent of execution order, so concurrent ladder points
draw identical values run to run.
"""

from __future__ import annotations

import hashlib

import numpy as np

GENERATOR = "philox4x64"


def derive_key(master_seed: int, *labels) -> bytes:
    """16-byte key from the master seed and task labels (ints or strings)."""
    h = hashlib.blake2b(b"ergolab.rng", digest_size=16)
    h.update(int(master_seed).to_bytes(8, "little", signed=False))
    for lab in labels:
        if isinstance(lab, str):
            h.update(b"s" + lab.encode())
        else:
            h.update(b"i" + int(lab).to_bytes(8, "little", signed=True))
    return h.digest()


def substream(master_seed: int, *labels) -> np.random.Generator:
    """Philox substream for (master seed, task index)."""
    key = int.from_bytes(derive_key(master_seed, *labels), "little")
    return np.random.Generator(np.random.Philox(key=key))
