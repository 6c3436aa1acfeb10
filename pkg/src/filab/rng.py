"""Seedable, splittable random streams.

Every stream is a PCG64 generator keyed by ``(master_seed, *keys)``.  String
keys are folded to integers with CRC32 so that the same experiment name maps
to the same stream on every platform and Python version.
"""
from __future__ import annotations

import zlib

import numpy as np

DEFAULT_SEED = 20240501


def _key(k) -> int:
    if isinstance(k, str):
        return zlib.crc32(k.encode("utf-8"))
    k = int(k)
    if k < 0:
        raise ValueError("stream keys must be non-negative")
    return k


def make_rng(seed: int, *keys) -> np.random.Generator:
    """Independent generator for the stream named by ``keys`` under ``seed``."""
    entropy = [_key(seed)] + [_key(k) for k in keys]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
