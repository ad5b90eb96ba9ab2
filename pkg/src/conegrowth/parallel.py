"""Deterministic fan-out of independent tasks.

Results always come back in task order, so aggregation never depends on the
worker count or on scheduling.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def default_workers() -> int:
    return max(1, (os.cpu_count() or 1))


def ordered_map(fn: Callable[[T], R], tasks: Iterable[T], workers: int = 1) -> list[R]:
    """``[fn(t) for t in tasks]``, optionally spread over ``workers`` processes."""
    tasks: Sequence[T] = list(tasks)
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    chunk = max(1, len(tasks) // (4 * workers))
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(fn, tasks, chunksize=chunk))
