"""Injectable time sources.

Everything in the ecosystem that touches time (session TTLs, emergency
grants, object timestamps) takes a clock object so that expiry semantics
can be tested without sleeping.
"""

from __future__ import annotations

import time


class SystemClock:
    """Wall time in seconds since the epoch."""

    def now(self) -> float:
        return time.time()


class VirtualClock:
    """Manually advanced clock for deterministic runs."""

    def __init__(self, start: float = 0.0):
        self._now = float(start)

    def now(self) -> float:
        return self._now

    def advance(self, seconds: float) -> float:
        if seconds < 0:
            raise ValueError("clock can only move forward")
        self._now += seconds
        return self._now

    def set(self, t: float) -> None:
        if t < self._now:
            raise ValueError("clock can only move forward")
        self._now = float(t)
