"""Ordered fan-out used by every per-file stage."""

from concurrent.futures import ThreadPoolExecutor


def parallel_map(fn, items, jobs=1):
    """``list(map(fn, items))`` on up to ``jobs`` threads; result order always matches ``items``."""
    items = list(items)
    if jobs is None or jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(fn, items))
