"""Deterministic RNG derivation.

All randomness in the package flows through `spawn_rng`. A task is
identified by a root seed plus a path of counters/names, and the generator
is derived as

    SeedSequence(entropy=root, spawn_key=(key(path[0]), key(path[1]), ...))

where integer path elements are used directly and strings are hashed with
crc32. Two tasks with different paths therefore get independent streams,
and the same (seed, path) always reproduces the same stream.
"""

import zlib

import numpy as np


def _as_key(part) -> int:
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError(f"seed path entries must be non-negative, got {part}")
        return int(part) % (1 << 32)
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    raise TypeError(f"seed path entries must be int or str, got {type(part)!r}")


def spawn_rng(seed: int, *path) -> np.random.Generator:
    """Derive an independent generator from a root seed and a task path."""
    key = tuple(_as_key(p) for p in path)
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=key))
