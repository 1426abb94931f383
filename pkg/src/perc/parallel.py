"""Deterministic chunked execution over replicate streams.

Samples are cut into fixed chunks of ``CHUNK`` consecutive stream indices.  Each
chunk is computed independently (numba kernels release the GIL) and chunk
results are combined by a fixed pairwise tree, so outputs do not depend on the
number of worker threads.
"""
from __future__ import annotations

import os
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")

CHUNK = 4096
_local = threading.local()


def worker_count() -> int:
    env = os.environ.get("PERC_THREADS")
    if env:
        value = int(env)
        if value < 1:
            raise ValueError("PERC_THREADS must be a positive integer")
        return value
    return os.cpu_count() or 1


def chunk_bounds(total: int, chunk: int = CHUNK) -> list[tuple[int, int]]:
    return [(start, min(chunk, total - start)) for start in range(0, total, chunk)]


def run_chunks(fn: Callable[[int, int], T], total: int, chunk: int = CHUNK,
               workers: int | None = None) -> list[T]:
    """``[fn(first, count) for each chunk]`` in chunk order, possibly on several threads."""
    bounds = chunk_bounds(total, chunk)
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(bounds) <= 1:
        return [fn(first, count) for first, count in bounds]
    with ThreadPoolExecutor(max_workers=min(workers, len(bounds))) as pool:
        return list(pool.map(lambda b: fn(*b), bounds))


def tree_merge(items: Sequence[T], merge: Callable[[T, T], T]) -> T:
    """Combine ``items`` pairwise, level by level, in a fixed order."""
    if not items:
        raise ValueError("nothing to merge")
    level = list(items)
    while len(level) > 1:
        nxt = [merge(level[i], level[i + 1]) for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return level[0]


def run_reduce(fn: Callable[[int, int], T], merge: Callable[[T, T], T], total: int, chunk: int = CHUNK,
               workers: int | None = None) -> T:
    """``tree_merge(run_chunks(fn, total, chunk), merge)`` holding O(log n) partial results.

    Aligned blocks of ``2^k`` chunks are merged as soon as they are complete and
    the leftovers are folded right to left, which reproduces the level-by-level
    tree exactly.
    """
    bounds = chunk_bounds(total, chunk)
    if not bounds:
        raise ValueError("nothing to merge")
    workers = worker_count() if workers is None else workers
    stack: list[tuple[int, T]] = []    # (chunks covered, value), sizes strictly decreasing powers of 2

    def push(value):
        size = 1
        while stack and stack[-1][0] == size:
            value = merge(stack.pop()[1], value)
            size *= 2
        stack.append((size, value))

    if workers <= 1 or len(bounds) <= 1:
        for first, count in bounds:
            push(fn(first, count))
    else:
        batch = 4 * workers
        with ThreadPoolExecutor(max_workers=min(workers, len(bounds))) as pool:
            for i in range(0, len(bounds), batch):
                for value in pool.map(lambda b: fn(*b), bounds[i:i + batch]):
                    push(value)
    value = stack.pop()[1]
    while stack:
        value = merge(stack.pop()[1], value)
    return value


def thread_cache(key, factory: Callable[[], T]) -> T:
    """Per-thread memo for scratch space."""
    cache = getattr(_local, "cache", None)
    if cache is None:
        cache = _local.cache = {}
    if key not in cache:
        if len(cache) > 8:
            cache.clear()
        cache[key] = factory()
    return cache[key]
