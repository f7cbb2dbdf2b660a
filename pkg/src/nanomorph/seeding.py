"""Deterministic random substreams derived from one 64-bit master seed."""
from __future__ import annotations

import zlib

import numpy as np


def stream_key(label: str, *indices: int):
    return (zlib.crc32(label.encode("utf-8")), *(int(i) for i in indices))


def substream(seed: int, label: str, *indices: int) -> np.random.Generator:
    """Generator for ``(seed, label, *indices)``; identical inputs give identical draws."""
    seed = int(seed)
    if not 0 <= seed < 2 ** 64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    ss = np.random.SeedSequence(seed, spawn_key=stream_key(label, *indices))
    return np.random.Generator(np.random.PCG64(ss))
