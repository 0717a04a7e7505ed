"""Shared helpers: deterministic batching and worker pools.

Monte Carlo loops are organised as a fixed list of path batches. Batches are
defined by path indices only, every path owns its own random stream, and
results are reduced in batch order, so estimates are byte-identical for any
worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

R = TypeVar("R")
S = TypeVar("S")

# Default number of statistics batches; also the unit of parallel work.
STAT_BATCHES = 20


def split_paths(total: int, batches: int = STAT_BATCHES) -> list[tuple[int, int]]:
    """Split ``total`` paths into ``batches`` contiguous (start, count) ranges.

    Counts differ by at most one; empty ranges are dropped.
    """
    if total < 1:
        raise ValueError("total paths must be >= 1")
    batches = min(batches, total)
    base, extra = divmod(total, batches)
    out = []
    start = 0
    for i in range(batches):
        count = base + (1 if i < extra else 0)
        out.append((start, count))
        start += count
    return out


def chunk_ranges(start: int, count: int, max_chunk: int) -> Iterable[tuple[int, int]]:
    """Yield (start, count) sub-ranges no larger than ``max_chunk``."""
    if max_chunk < 1:
        raise ValueError("max_chunk must be >= 1")
    done = 0
    while done < count:
        c = min(max_chunk, count - done)
        yield start + done, c
        done += c


# Transient per-chunk allocation cap, in float64 counts (~540 MB across the
# handful of live fine-grid arrays); path chunks are sized to stay under it.
CHUNK_FLOAT_BUDGET = 2**26


def compute_chunks(total: int, per_path_floats: int, threads: int) -> list[tuple[int, int]]:
    """Path ranges for the compute workers.

    Chunks are as large as the memory budget allows, but small enough to feed
    every worker. Per-path results never depend on how paths are grouped (all
    kernels act path-wise), so any chunking yields identical output arrays.
    """
    workers = resolve_threads(threads)
    max_chunk = max(16, CHUNK_FLOAT_BUDGET // max(1, per_path_floats))
    if workers > 1:
        max_chunk = min(max_chunk, max(16, -(-total // workers)))
    return list(chunk_ranges(0, total, max_chunk))


def resolve_threads(threads: int) -> int:
    """0 means auto; negative is rejected.

    Auto resolves to 1: the marching kernels are dominated by many small numpy
    calls that hold the GIL, so oversubscribing threads slows them down. An
    explicit positive count is honoured as given; results are identical either
    way.
    """
    if threads < 0:
        raise ValueError("threads must be >= 0")
    if threads == 0:
        return 1
    return threads


def run_batches(worker: Callable[[S], R], specs: Sequence[S], threads: int = 1) -> list[R]:
    """Apply ``worker`` to each spec, preserving order.

    With ``threads`` > 1 the work runs on a thread pool; numpy releases the
    GIL in the heavy kernels. Output order equals input order regardless of
    scheduling, which is what the determinism guarantees rely on.
    """
    threads = resolve_threads(threads)
    if threads == 1 or len(specs) <= 1:
        return [worker(s) for s in specs]
    with ThreadPoolExecutor(max_workers=min(threads, len(specs))) as pool:
        return list(pool.map(worker, specs))
