from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

logger = logging.getLogger(__name__)

THREADS_ENV_VAR = "COMMITMENT_SOLVER_THREADS"

T = TypeVar("T")
R = TypeVar("R")


def resolve_worker_count(default: int | None = None) -> int:
    raw = os.environ.get(THREADS_ENV_VAR)
    if raw is None or not raw.strip():
        return default if default is not None else min(4, os.cpu_count() or 1)
    try:
        parsed = int(raw)
    except ValueError:
        logger.warning("ignoring %s=%r (not an integer); using 1 worker", THREADS_ENV_VAR, raw)
        return 1
    if parsed < 1:
        logger.warning("ignoring %s=%r (must be >= 1); using 1 worker", THREADS_ENV_VAR, raw)
        return 1
    return parsed


def map_concurrently(fn: Callable[[T], R], items: Iterable[T], *, workers: int | None = None) -> list[R]:
    """Apply fn to every item, preserving input order. Runs inline for one worker."""
    items = list(items)
    workers = resolve_worker_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


__all__ = ["THREADS_ENV_VAR", "map_concurrently", "resolve_worker_count"]
