"""Counter-based keyed hashing.

Every random quantity in a simulation is a pure function of a master seed, a
stream tag and an integer key (edge endpoints, vertex coordinates, a frog's
origin and time step, ...).  Nothing is streamed from a stateful generator, so
values agree across calls, processes and worker counts.
"""
from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1

# stream tags
TAG_EDGE = 1
TAG_COLOR = 2
TAG_RATE = 3
TAG_FROG = 4
TAG_SEED = 5


def mix64(x: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer on a uint64 array (wrapping arithmetic)."""
    x = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        x = (x ^ (x >> np.uint64(30))) * _M1
        x = (x ^ (x >> np.uint64(27))) * _M2
        x = x ^ (x >> np.uint64(31))
    return x


def _as_u64(v) -> np.ndarray:
    a = np.asarray(v)
    if a.dtype == np.uint64:
        return a
    return a.astype(np.int64).view(np.uint64)


def hash_rows(seed: int, tag: int, cols: np.ndarray) -> np.ndarray:
    """Hash each row of an integer array under ``(seed, tag)``.

    Parameters
    ----------
    seed : int
        64-bit master seed.
    tag : int
        Stream tag, keeps independent quantities decorrelated.
    cols : ndarray of shape (N, k) or (N,)
        Signed integer keys.

    Returns
    -------
    ndarray of uint64, shape (N,)
    """
    cols = np.asarray(cols)
    if cols.ndim == 1:
        cols = cols[:, None]
    base = mix64(np.array([(seed & _MASK64)], dtype=np.uint64) ^ mix64(np.array([tag], dtype=np.uint64) + _GOLDEN))
    h = np.full(cols.shape[0], base[0], dtype=np.uint64)
    with np.errstate(over="ignore"):
        for i in range(cols.shape[1]):
            h = mix64(h ^ (_as_u64(cols[:, i]) + _GOLDEN * np.uint64(i + 1)))
    return mix64(h + _GOLDEN)


def uniform01(h: np.ndarray) -> np.ndarray:
    """Map uint64 hashes to floats in [0, 1) using the top 53 bits."""
    return (np.asarray(h, dtype=np.uint64) >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)


def derive_seed(master: int, *keys: int) -> int:
    """Deterministic child seed from a master seed and integer keys."""
    h = hash_rows(master, TAG_SEED, np.array([list(keys) or [0]], dtype=np.int64))
    return int(h[0])
