"""Deterministic, splittable random streams."""

import zlib

import numpy as np


def _key_to_int(key: int | str) -> int:
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf-8"))
    if key < 0:
        raise ValueError(f"seed keys must be non-negative, got {key}")
    return int(key)


def derive_seed(seed: int, *keys: int | str) -> np.random.SeedSequence:
    """SeedSequence for the component named by ``keys`` under ``seed``."""
    return np.random.SeedSequence([_key_to_int(seed), *(_key_to_int(k) for k in keys)])


def derive_rng(seed: int, *keys: int | str) -> np.random.Generator:
    """Independent generator for one component.

    Equal ``(seed, keys)`` always give the same stream, whatever else has
    been drawn before, so per-trajectory or per-candidate work can run in any
    order or in parallel.
    """
    return np.random.Generator(np.random.PCG64(derive_seed(seed, *keys)))
