"""Worker-thread budget for the per-frequency kernels.

The cap comes from the ``BKWS_THREADS`` environment variable (0 or unset
means auto). Work is split into fixed per-item units so results are
bit-identical for any thread count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

from .errors import ConfigError

_ENV_VAR = "BKWS_THREADS"


def thread_budget() -> int:
    """Number of worker threads to use (>= 1)."""
    raw = os.environ.get(_ENV_VAR, "0").strip()
    try:
        n = int(raw) if raw else 0
    except ValueError:
        raise ConfigError(f"{_ENV_VAR} must be an integer, got {raw!r}")
    if n < 0:
        raise ConfigError(f"{_ENV_VAR} must be >= 0, got {n}")
    if n == 0:
        return min(os.cpu_count() or 1, 8)
    return n


def run_chunked(work: Callable[[int, int], None], total: int, threads: int | None = None) -> None:
    """Run ``work(start, stop)`` over ``[0, total)`` split into chunks.

    ``work`` must write its results into caller-owned storage indexed by
    item position; chunk boundaries never change per-item arithmetic, so
    output does not depend on the thread count.
    """
    if total <= 0:
        return
    n = thread_budget() if threads is None else max(1, threads)
    if n == 1 or total == 1:
        work(0, total)
        return
    n = min(n, total)
    step = (total + n - 1) // n
    bounds = [(s, min(s + step, total)) for s in range(0, total, step)]
    with ThreadPoolExecutor(max_workers=n) as pool:
        futures = [pool.submit(work, s, e) for s, e in bounds]
        for fut in futures:
            fut.result()
