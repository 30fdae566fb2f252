"""Seeded, worker-invariant block parallelism."""

from __future__ import annotations

from collections.abc import Callable, Sequence
from typing import TypeVar

import numpy as np
from joblib import Parallel, delayed

T = TypeVar("T")

Seed = int | Sequence[int]


def block_sizes(total: int, block_size: int) -> list[int]:
    """Split `total` items into consecutive blocks of at most `block_size`."""
    if total <= 0:
        return []
    full, rest = divmod(total, block_size)
    sizes = [block_size] * full
    if rest:
        sizes.append(rest)
    return sizes


def spawn_generators(seed: Seed, n_blocks: int) -> list[np.random.Generator]:
    """One generator per block, derived from (seed, block index) only."""
    children = np.random.SeedSequence(seed).spawn(n_blocks)
    return [np.random.default_rng(child) for child in children]


def run_seeded_blocks(
    fn: Callable[..., T],
    total: int,
    block_size: int,
    seed: Seed,
    workers: int = 1,
    pass_offset: bool = False,
) -> list[T]:
    """Run fn(block_len, rng) for every block and return results in block order.

    With pass_offset=True the call is fn(start, block_len, rng), where start is
    the index of the block's first item. The block layout depends on
    (total, block_size) only, so results do not change with the worker count.
    """
    sizes = block_sizes(total, block_size)
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(int) if sizes else []
    rngs = spawn_generators(seed, len(sizes))
    if pass_offset:
        calls = [(int(start), size, rng) for start, size, rng in zip(starts, sizes, rngs)]
    else:
        calls = [(size, rng) for size, rng in zip(sizes, rngs)]
    if workers <= 1 or len(calls) <= 1:
        return [fn(*args) for args in calls]
    return Parallel(n_jobs=workers)(delayed(fn)(*args) for args in calls)


def run_chunks(fn: Callable[[Sequence], T], items: Sequence, chunk_size: int, workers: int = 1) -> list[T]:
    """Deterministic chunked map; chunk results come back in input order."""
    chunks = [items[i : i + chunk_size] for i in range(0, len(items), chunk_size)]
    if workers <= 1 or len(chunks) <= 1:
        return [fn(chunk) for chunk in chunks]
    return Parallel(n_jobs=workers)(delayed(fn)(chunk) for chunk in chunks)
