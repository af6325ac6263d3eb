"""Chunked per-bin execution.

Chunk boundaries are fixed by ``CHUNK`` and never by the worker count, so the
numbers produced for each bin do not depend on how many threads run.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

CHUNK = 2048


def thread_count() -> int:
    try:
        n = int(os.environ.get("MRIDENT_THREADS", "1"))
    except ValueError:
        n = 1
    return max(1, n)


def chunked_map(fn, n_items: int, chunk: int = CHUNK):
    """Apply ``fn(start, stop)`` over fixed chunks; results in chunk order."""
    bounds = [(s, min(s + chunk, n_items)) for s in range(0, n_items, chunk)]
    workers = thread_count()
    if workers == 1 or len(bounds) == 1:
        return [fn(a, b) for a, b in bounds]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(lambda ab: fn(*ab), bounds))
