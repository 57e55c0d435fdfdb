"""Run clocks. All pipeline timestamps are milliseconds since run start.

A run uses exactly one clock: the wall clock for real paced replays, the
virtual clock for deterministic simulation (time only moves when advanced).
"""

from __future__ import annotations

import time
from typing import Protocol, runtime_checkable


@runtime_checkable
class Clock(Protocol):
    def now(self) -> float: ...

    def sleep_until(self, target_ms: float) -> None: ...


class WallClock:
    """Monotonic wall clock with its origin at construction time."""

    def __init__(self) -> None:
        self._origin = time.monotonic()

    def now(self) -> float:
        return (time.monotonic() - self._origin) * 1000.0

    def sleep_until(self, target_ms: float) -> None:
        # Absolute-target sleeping: pacing drift does not accumulate.
        while True:
            remaining = target_ms - self.now()
            if remaining <= 0:
                return
            time.sleep(remaining / 1000.0)


class VirtualClock:
    """Deterministic clock that moves only when explicitly advanced."""

    def __init__(self, start_ms: float = 0.0) -> None:
        self._now = start_ms

    def now(self) -> float:
        return self._now

    def advance_to(self, target_ms: float) -> None:
        if target_ms > self._now:
            self._now = target_ms

    def advance(self, delta_ms: float) -> None:
        self.advance_to(self._now + delta_ms)

    def sleep_until(self, target_ms: float) -> None:
        self.advance_to(target_ms)
