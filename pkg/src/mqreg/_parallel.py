"""Deterministic process-pool helper.

Work items carry their own derived RNG streams, and results are returned
in submission order, so output is bit-identical for any worker count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor


def run_ordered(worker, items, threads: int = 1, chunksize: int = 1):
    """Map worker over items, preserving input order."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [worker(it) for it in items]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, items, chunksize=chunksize))
