"""Ordered thread-pool map; results never depend on the thread count."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor


def parallel_map(fn, items, threads: int = 1) -> list:
    """``[fn(x) for x in items]``, evaluated on ``threads`` workers.

    Every item carries its own stream indices, so evaluation order is
    irrelevant and the output list is always in input order.
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))
