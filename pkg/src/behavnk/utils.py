"""Small shared utilities."""

from __future__ import annotations

import os


def worker_count() -> int:
    """Worker count from the ``BEHAVNK_WORKERS`` environment variable."""
    raw = os.environ.get("BEHAVNK_WORKERS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def parallel_map(fn, items):
    """Map ``fn`` over ``items``, in parallel when workers are configured.

    Results are returned in input order regardless of scheduling, so the
    output is identical to the serial map.
    """
    n_jobs = worker_count()
    if n_jobs == 1 or len(items) < 4:
        return [fn(item) for item in items]
    from joblib import Parallel, delayed

    return Parallel(n_jobs=n_jobs)(delayed(fn)(item) for item in items)
