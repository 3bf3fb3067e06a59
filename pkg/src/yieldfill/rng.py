"""Deterministic random-stream derivation.

Every random choice in the package flows from a single root seed, fanned
out into independent named streams (split, corruption, init, search, ...)
so each component is reproducible on its own and streams never collide.
Streams are keyed structurally rather than by sharing one generator, so
work split across workers stays deterministic.
"""
from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["seed_sequence", "stream", "derive_seed"]


def _encode(part) -> int:
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError(f"stream path parts must be nonnegative, got {part}")
        return int(part)
    if isinstance(part, str):
        digest = hashlib.sha256(part.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "big")
    raise TypeError(f"unsupported stream path part: {part!r}")


def seed_sequence(root_seed: int, *path) -> np.random.SeedSequence:
    """SeedSequence for the stream identified by ``(root_seed, *path)``."""
    key: list[int] = []
    for part in path:
        value = _encode(part)
        key.append(value & 0xFFFFFFFF)
        key.append((value >> 32) & 0xFFFFFFFF)
    return np.random.SeedSequence(entropy=root_seed, spawn_key=tuple(key))


def stream(root_seed: int, *path) -> np.random.Generator:
    """Independent PCG64 generator keyed on ``(root_seed, *path)``."""
    return np.random.default_rng(seed_sequence(root_seed, *path))


def derive_seed(root_seed: int, *path) -> int:
    """Collapse a stream key to a single 64-bit seed (for nested configs)."""
    state = seed_sequence(root_seed, *path).generate_state(2, np.uint32)
    return int(state[0]) | (int(state[1]) << 32)
