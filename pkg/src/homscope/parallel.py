"""Order-preserving parallel map, capped by the HOMSCOPE_THREADS variable."""

import os
from concurrent.futures import ThreadPoolExecutor


def max_workers() -> int:
    try:
        return max(1, int(os.environ.get("HOMSCOPE_THREADS", "1")))
    except ValueError:
        return 1


def ordered_map(func, items) -> list:
    """``[func(x) for x in items]``, threaded when HOMSCOPE_THREADS > 1.

    Results come back in input order, so output never depends on scheduling.
    """
    items = list(items)
    workers = min(max_workers(), len(items))
    if workers <= 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))
