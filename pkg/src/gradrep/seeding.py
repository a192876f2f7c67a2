"""Deterministic derivation of per-stream RNG seeds from one master seed.

Every source of randomness in a run (per-image selection masks, weight
init, epoch shuffling, few-shot subsampling, ...) draws from its own
stream. A stream is identified by a name and an integer index, and its
seed is obtained by mixing (name, index) into the master seed with a
fixed 64-bit hash, so runs are reproducible from a single knob and
streams stay independent of each other.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def _fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for byte in data:
        h ^= byte
        h = (h * 0x100000001B3) & _MASK64
    return h


def derive_seed(master_seed: int, stream: str, index: int = 0) -> int:
    """Return the 64-bit seed for stream ``(stream, index)`` under ``master_seed``."""
    mixed = ((master_seed & _MASK64) ^ _fnv1a64(stream.encode("utf-8"))) + index
    return _splitmix64(mixed & _MASK64)


def stream_rng(master_seed: int, stream: str, index: int = 0) -> np.random.Generator:
    """A fresh ``numpy`` generator seeded for the given stream."""
    return np.random.default_rng(derive_seed(master_seed, stream, index))
