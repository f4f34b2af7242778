"""Bounded parallel map with deterministic ordering.

ACHOPF_THREADS bounds the worker count (default 1 = sequential).  Results are
always collected in input order, so reductions downstream are reproducible.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def thread_count() -> int:
    try:
        n = int(os.environ.get("ACHOPF_THREADS", "1"))
    except ValueError:
        return 1
    return max(1, n)


def map_ordered(fn, items):
    items = list(items)
    n = thread_count()
    if n <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(n, len(items))) as ex:
        return list(ex.map(fn, items))
