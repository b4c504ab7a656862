"""Chunked, seeded Monte Carlo averaging.

Samples are cut into fixed-size chunks, each with its own child seed spawned
from the master seed. Chunks are farmed out to a thread pool bounded by
``TELECERT_THREADS`` and merged in chunk order, so the result depends only on
the seed and sample count, never on how many workers ran.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

CHUNK = 1 << 17


def worker_count() -> int:
    raw = os.environ.get("TELECERT_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ValueError(f"TELECERT_THREADS must be an integer, got {raw!r}") from None
    return max(1, min(8, os.cpu_count() or 1))


def resolve_seed(rng) -> int:
    """Turn an int seed, a Generator or None into a master seed."""
    if rng is None:
        return int(np.random.SeedSequence().entropy % (1 << 63))
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(0, 1 << 63))
    if isinstance(rng, (int, np.integer)):
        if rng < 0:
            raise ValueError("seed must be non-negative")
        return int(rng)
    raise TypeError(f"cannot derive a seed from {type(rng).__name__}")


@dataclass(frozen=True)
class Moments:
    mean: float
    std_error: float
    count: int


def _chunk_stats(values: np.ndarray) -> tuple[int, float, float]:
    n = values.size
    mean = float(np.mean(values))
    m2 = float(np.sum((values - mean) ** 2))
    return n, mean, m2


def mean_estimate(
    draw: Callable[[np.random.Generator, int], np.ndarray],
    n: int,
    seed: int,
    chunk: int = CHUNK,
) -> Moments:
    """Mean and standard error of ``draw(rng, m)`` values over ``n`` samples.

    ``draw`` must return ``m`` per-sample values. Chunk statistics are merged
    with the pairwise update of Chan et al. in chunk order.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    sizes = [chunk] * (n // chunk)
    if n % chunk:
        sizes.append(n % chunk)
    children = np.random.SeedSequence(seed).spawn(len(sizes))

    def run(i: int):
        rng = np.random.default_rng(children[i])
        return _chunk_stats(np.asarray(draw(rng, sizes[i]), dtype=float))

    workers = min(worker_count(), len(sizes))
    if workers == 1:
        parts = [run(i) for i in range(len(sizes))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(len(sizes))))

    count, mean, m2 = parts[0]
    for nb, mb, m2b in parts[1:]:
        total = count + nb
        delta = mb - mean
        mean += delta * nb / total
        m2 += m2b + delta * delta * count * nb / total
        count = total
    var = m2 / (count - 1) if count > 1 else 0.0
    return Moments(mean, math.sqrt(var / count), count)
