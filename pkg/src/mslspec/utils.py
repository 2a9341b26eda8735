"""Small shared helpers."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor


def parallel_map(fn, items, degree: int = 1):
    """Ordered map with an optional thread pool.

    Results are collected in input order regardless of completion order, so
    any fixed-order reduction over them is identical for every degree.
    """
    items = list(items)
    if degree <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=degree) as pool:
        return list(pool.map(fn, items))
