"""Thread-pool helper with a deterministic, order-preserving reduction."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

ENV_THREADS = "CRCSEG_THREADS"


def default_threads() -> int:
    """CRCSEG_THREADS if set, else the machine's core count."""
    env = os.environ.get(ENV_THREADS)
    if env is not None:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"{ENV_THREADS} must be an integer, got {env!r}") from None
        if n < 1:
            raise ValueError(f"{ENV_THREADS} must be >= 1, got {n}")
        return n
    return os.cpu_count() or 1


def parallel_map(fn, items, threads: int = 1) -> list:
    """Map ``fn`` over ``items``, results in input order regardless of threads."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
