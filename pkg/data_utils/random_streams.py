"""
Seeded random streams.

A single user seed fans out into named, independent sub-streams so that
adding a new consumer never shifts the numbers an existing one sees.
"""

import hashlib
from typing import List

import numpy as np


def _name_key(name: str) -> tuple:
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return tuple(int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4))


def seed_sequence(seed: int, name: str) -> np.random.SeedSequence:
    if seed < 0:
        raise ValueError("seed must be non-negative")
    return np.random.SeedSequence(entropy=int(seed), spawn_key=_name_key(name))


def named_stream(seed: int, name: str) -> np.random.Generator:
    """Counter-based (Philox) generator for the sub-stream ``name``."""
    return np.random.Generator(np.random.Philox(seed_sequence(seed, name)))


def spawn_streams(seed: int, name: str, count: int) -> List[np.random.Generator]:
    """``count`` independent generators, one per chunk or run, in id order."""
    children = seed_sequence(seed, name).spawn(count)
    return [np.random.Generator(np.random.Philox(child)) for child in children]


def spawn_seeds(seed: int, name: str, count: int) -> List[int]:
    """Integer seeds for per-run provenance records."""
    children = seed_sequence(seed, name).spawn(count)
    return [int(child.generate_state(1, dtype=np.uint32)[0]) for child in children]
