"""Counter-based random streams and deterministic block-parallel execution.

Every random draw in the package comes from a Philox generator keyed by the
pair ``(master_seed, stream_index)``.  Replicas are grouped in fixed-size
blocks, one stream per block, so results do not depend on how many workers
process the blocks.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")

_MASK64 = (1 << 64) - 1


def mix64(*values: int) -> int:
    """SplitMix64-style mixing of a tuple of integers into one 64-bit word."""
    h = 0x9E3779B97F4A7C15
    for v in values:
        h = (h ^ (int(v) & _MASK64)) & _MASK64
        h = (h + 0x9E3779B97F4A7C15) & _MASK64
        z = h
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        h = z ^ (z >> 31)
    return h


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by ``(master_seed, stream_index)``."""

    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_index"):
            v = getattr(self, name)
            if not (0 <= int(v) <= _MASK64):
                raise ValueError(f"{name} must fit in an unsigned 64-bit integer")

    def generator(self) -> np.random.Generator:
        key = np.array([self.master_seed, self.stream_index], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def spawn(self, *path: int) -> "RngStream":
        """Child stream; the child index is a hash of this index and ``path``."""
        return RngStream(self.master_seed, mix64(self.stream_index, *path))

    def blocks(self, n_blocks: int, tag: int = 0) -> list["RngStream"]:
        return [self.spawn(tag, b) for b in range(n_blocks)]


def as_stream(rng) -> RngStream:
    if isinstance(rng, RngStream):
        return rng
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng), 0)
    raise TypeError(f"expected RngStream or integer seed, got {type(rng).__name__}")


_THREADS = 1


def set_threads(k: int) -> None:
    """Set the worker count used by :func:`run_blocks` (does not change results)."""
    global _THREADS
    _THREADS = max(1, int(k))


def get_threads() -> int:
    return _THREADS


def split_reps(reps: int, block_size: int) -> list[int]:
    n_full, rest = divmod(int(reps), int(block_size))
    sizes = [block_size] * n_full
    if rest:
        sizes.append(rest)
    return sizes


def run_blocks(
    fn: Callable[[np.random.Generator, int, int], T],
    reps: int,
    rng: RngStream,
    block_size: int = 4096,
    tag: int = 0,
    threads: int | None = None,
) -> list[T]:
    """Run ``fn(generator, block_index, block_reps)`` over fixed replica blocks.

    The block partition depends only on ``reps`` and ``block_size``, and block
    ``b`` always draws from ``rng.spawn(tag, b)``; results come back in block
    order whatever the worker count.
    """
    sizes = split_reps(reps, block_size)
    streams = rng.blocks(len(sizes), tag)
    jobs = [(s.generator(), b, n) for b, (s, n) in enumerate(zip(streams, sizes))]
    k = threads or _THREADS
    if k <= 1 or len(jobs) <= 1:
        return [fn(*j) for j in jobs]
    with ThreadPoolExecutor(max_workers=k) as pool:
        return list(pool.map(lambda j: fn(*j), jobs))


def fsum_pairs(values: Sequence[float]) -> float:
    """Compensated sum, insensitive to reduction order."""
    return math.fsum(values)
