"""Trajectory-chunk parallelism.

Chunk boundaries depend only on the ensemble size, never on the thread
count, and results are reassembled in chunk order, so outputs are identical
for any ``SQLSIM_THREADS`` setting.
"""

import os
from concurrent.futures import ThreadPoolExecutor

CHUNK = 256


def thread_count(threads=None):
    if threads is None:
        threads = int(os.environ.get("SQLSIM_THREADS", "0") or 0)
    if threads <= 0:
        threads = os.cpu_count() or 1
    return threads


def chunk_ranges(n, chunk=CHUNK):
    return [range(lo, min(lo + chunk, n)) for lo in range(0, n, chunk)]


def map_chunks(fn, n, threads=None, chunk=CHUNK):
    """Apply ``fn(range)`` to consecutive index chunks; return results in order."""
    ranges = chunk_ranges(n, chunk)
    threads = min(thread_count(threads), len(ranges))
    if threads <= 1:
        return [fn(r) for r in ranges]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, ranges))
