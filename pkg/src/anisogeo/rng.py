"""Deterministic random-stream management.

All Monte Carlo estimators draw from counter-based Philox streams keyed by
(seed, context path, chunk index). Sampling is performed in fixed-size chunks
and reduced in chunk order, so results are independent of how chunks are
scheduled across workers: identical seeds give byte-identical outputs for any
worker count.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

# Chunk granularity for all chunked samplers. Part of the reproducibility
# contract: changing it changes which stream produces which sample.
CHUNK = 1 << 19


def substream(seed: int, *path: int) -> np.random.Generator:
    """Return an independent Philox generator for (seed, *path).

    Distinct paths yield statistically independent streams; the same
    (seed, path) always yields the same stream.
    """
    if seed < 0:
        raise ValueError("seed must be a non-negative integer")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def n_chunks(total: int) -> int:
    return (int(total) + CHUNK - 1) // CHUNK


def chunk_bounds(total: int, idx: int) -> tuple[int, int]:
    lo = idx * CHUNK
    return lo, min(lo + CHUNK, int(total))


def box_chunk(seed: int, path: tuple[int, ...], idx: int, total: int,
              lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Uniform samples in the box [lo, hi] for chunk `idx` of `total` draws."""
    a, b = chunk_bounds(total, idx)
    g = substream(seed, *path, idx)
    x = g.random((b - a, lo.size))
    return lo + x * (hi - lo)


def map_chunks(fn, total: int, workers: int = 1):
    """Apply fn(chunk_index) for every chunk of `total` samples.

    Returns the list of results in chunk order regardless of scheduling.
    """
    m = n_chunks(total)
    if workers <= 1 or m <= 1:
        return [fn(i) for i in range(m)]
    with ThreadPoolExecutor(max_workers=int(workers)) as ex:
        return list(ex.map(fn, range(m)))
