"""Deterministic seed fan-out.

A child seed is derived from a parent seed and a path of string/int keys:
``SeedSequence([parent, crc32(key_1), crc32(key_2), ...])``. Children never
depend on sibling order, so adding a component leaves existing streams intact.
"""
import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _key(k) -> int:
    return zlib.crc32(str(k).encode("utf-8"))


def derive_seed(seed: int, *keys) -> int:
    words = [int(seed) & 0xFFFFFFFF, (int(seed) & _MASK64) >> 32]
    words += [_key(k) for k in keys]
    state = np.random.SeedSequence(words).generate_state(2, dtype=np.uint32)
    return int(state[0]) | (int(state[1]) << 32)


def derive_rng(seed: int, *keys) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *keys))
