from __future__ import annotations

import time
from dataclasses import dataclass


def now_unix_s() -> float:
    return time.time()


@dataclass(slots=True)
class Timer:
    """Wall-clock stopwatch for step logging; monotonic, unaffected by clock changes."""

    start_s: float

    @classmethod
    def start(cls) -> "Timer":
        return cls(start_s=time.perf_counter())

    def elapsed_s(self) -> float:
        return max(0.0, time.perf_counter() - self.start_s)
