"""Hashing, timing and thread fan-out helpers."""

from __future__ import annotations

from .hashing import sha256_file
from .parallel import THREADS_ENV_VAR, map_concurrently, resolve_worker_count
from .time import Timer, now_unix_s

__all__ = [
    "THREADS_ENV_VAR",
    "Timer",
    "map_concurrently",
    "now_unix_s",
    "resolve_worker_count",
    "sha256_file",
]
