"""Fixed-slot chunking of a batch across a thread pool.

Each worker writes only into its own preassigned index range, so the result
never depends on how many workers ran or in which order they finished.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable


def chunk_bounds(size: int, workers: int) -> list[tuple[int, int]]:
    workers = max(1, min(int(workers), size))
    edges = [size * j // workers for j in range(workers + 1)]
    return [(edges[j], edges[j + 1]) for j in range(workers) if edges[j] < edges[j + 1]]


def run_chunked(fn: Callable[[int, int], None], size: int, workers: int = 1) -> None:
    """Call ``fn(lo, hi)`` over a partition of ``range(size)``."""
    bounds = chunk_bounds(size, workers)
    if len(bounds) <= 1:
        for lo, hi in bounds:
            fn(lo, hi)
        return
    with ThreadPoolExecutor(max_workers=len(bounds)) as pool:
        futures = [pool.submit(fn, lo, hi) for lo, hi in bounds]
        for fut in futures:
            fut.result()
