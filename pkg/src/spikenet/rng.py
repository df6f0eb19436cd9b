"""Reproducible random streams.

Every replica gets its own Philox (counter-based) stream keyed by
``(master_seed, replica_index)`` through :class:`numpy.random.SeedSequence`
spawn keys, so streams are independent by construction and do not depend on
how replicas are distributed over workers.
"""
from __future__ import annotations

import secrets

import numpy as np

__all__ = ["DEFAULT_SEED", "derive_seed", "replica_bitgen", "replica_stream", "resolve_seed", "make_stream"]

DEFAULT_SEED = 20200101


def resolve_seed(seed) -> int:
    """Turn ``None``/``"random"``/int-like into a concrete non-negative seed.

    ``None`` maps to :data:`DEFAULT_SEED`; only the explicit string
    ``"random"`` draws fresh entropy.
    """
    if seed is None:
        return DEFAULT_SEED
    if isinstance(seed, str):
        if seed.strip().lower() == "random":
            return secrets.randbits(63)
        seed = int(seed)
    seed = int(seed)
    if seed < 0:
        raise ValueError("seeds must be non-negative")
    return seed


def derive_seed(master_seed: int, *keys: int) -> int:
    """Child seed for a sub-study (e.g. one N of a ladder), stable under reordering."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def replica_bitgen(master_seed: int, index: int) -> np.random.Philox:
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(index),))
    return np.random.Philox(ss)


def replica_stream(master_seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(replica_bitgen(master_seed, index))


def make_stream(seed=None) -> np.random.Generator:
    """A Philox-backed generator for one-off use (tests, single runs)."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(resolve_seed(seed)))
