"""
Counter-based random substreams.

Every stochastic step draws from its own numpy Generator, seeded by a
SHA-256 digest of (master seed, keys...). A replicate's randomness depends
only on its index, never on scheduling, so studies are bit-identical for
any worker count.
"""

from __future__ import annotations

import hashlib

import numpy as np

STREAM_VERSION = "ldcanon_stream_v1"


def _u64_from_sha256(s: str) -> int:
    """Convert string to deterministic u64."""
    h = hashlib.sha256(s.encode("utf-8")).digest()
    return int.from_bytes(h[:8], byteorder="little", signed=False)


def substream_seed(master: int, *keys: object) -> int:
    """Deterministic 64-bit seed for the stream named by `keys` under `master`."""
    label = "|".join(str(k) for k in keys)
    return _u64_from_sha256(f"{STREAM_VERSION}|{int(master)}|{label}")


def substream(master: int, *keys: object) -> np.random.Generator:
    """Independent Generator for (master, keys...)."""
    return np.random.default_rng(substream_seed(master, *keys))


__all__ = ["substream_seed", "substream", "STREAM_VERSION"]
