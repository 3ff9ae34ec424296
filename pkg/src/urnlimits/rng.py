"""Reproducible random streams for replicated simulations.

Replicates are grouped into fixed-size blocks; block ``i`` draws from a
Philox generator keyed by ``(seed, i)``.  Block boundaries do not depend on
the number of worker threads, so results are identical for any pool size.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np

BLOCK_SIZE = 4096


def stream(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator for the stream identified by ``(seed, *key)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, key)])))


def blocks(n: int, block_size: int = BLOCK_SIZE) -> list[tuple[int, int]]:
    return [(lo, min(lo + block_size, n)) for lo in range(0, n, block_size)]


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("URNLIMITS_THREADS", "1")))
    except ValueError:
        return 1


def run_blocks(
    fn: Callable[[np.random.Generator, int], np.ndarray],
    n: int,
    seed: int,
    key: Sequence[int] = (),
    threads: int | None = None,
    block_size: int = BLOCK_SIZE,
) -> np.ndarray:
    """Evaluate ``fn(rng, size)`` per block and concatenate in block order."""
    threads = default_threads() if threads is None else max(1, int(threads))
    spans = blocks(n, block_size)

    def work(i):
        lo, hi = spans[i]
        return fn(stream(seed, *key, i), hi - lo)

    if threads == 1 or len(spans) == 1:
        parts = [work(i) for i in range(len(spans))]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, range(len(spans))))
    return np.concatenate(parts, axis=0)
