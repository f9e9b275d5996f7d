"""Counter-based random streams keyed by hierarchical string labels.

Every random draw in the package is tied to a key such as
``"run7/L2/n15"``: the key is hashed to a 128-bit Philox counter key, so
streams are independent across keys, reproducible bit-for-bit, and need no
shared state between concurrent workers.
"""

from __future__ import annotations

import hashlib

import numpy as np


def philox_key(label: str) -> int:
    """Map a key label to a 128-bit integer Philox key."""
    digest = hashlib.blake2b(label.encode("utf-8"), digest_size=16).digest()
    return int.from_bytes(digest, "big")


def make_rng(label: str) -> np.random.Generator:
    """Independent generator for the given key label."""
    return np.random.Generator(np.random.Philox(key=philox_key(label)))


def sample_key(run_id: str, level: int, index: int) -> str:
    """Canonical key of one sample draw: (run id, level, sample index)."""
    return f"{run_id}/L{level}/n{index}"
