"""Thread-pool map with results returned in input order."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def default_threads() -> int:
    return max(1, min(8, os.cpu_count() or 1))


def map_ordered(func, items, threads=1):
    """``[func(x) for x in items]``, optionally on a thread pool.

    Results come back in input order, so any reduction over them is
    independent of the number of threads.
    """
    items = list(items)
    if threads is None:
        threads = default_threads()
    if threads <= 1 or len(items) <= 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))
