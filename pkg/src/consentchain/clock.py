"""Logical and wall clocks. Ledger time is integer milliseconds since 1970-01-01 (naive, UTC-like)."""

from __future__ import annotations

import time
from datetime import datetime, timedelta

EPOCH = datetime(1970, 1, 1)
_MS = timedelta(milliseconds=1)


def to_ms(dt: datetime) -> int:
    return (dt - EPOCH) // _MS


def from_ms(ms: int) -> datetime:
    return EPOCH + ms * _MS


class LogicalClock:
    """Caller-driven clock; never moves unless told to, and never backwards."""

    def __init__(self, start: datetime = datetime(2024, 6, 3, 8, 0)) -> None:
        self._ms = to_ms(start)

    def now(self) -> datetime:
        return from_ms(self._ms)

    def now_ms(self) -> int:
        return self._ms

    def set(self, when: datetime | int) -> None:
        ms = when if isinstance(when, int) else to_ms(when)
        if ms < self._ms:
            raise ValueError(f"clock cannot move backwards ({from_ms(ms)} < {self.now()})")
        self._ms = ms

    def advance(self, ms: int) -> None:
        self.set(self._ms + ms)

    def wait_until(self, ms: int) -> None:
        if ms > self._ms:
            self._ms = ms


class WallClock:
    def now(self) -> datetime:
        return datetime.utcnow()

    def now_ms(self) -> int:
        return to_ms(self.now())

    def set(self, when) -> None:
        raise TypeError("wall clock cannot be set")

    def advance(self, ms: int) -> None:
        time.sleep(ms / 1000)

    def wait_until(self, ms: int) -> None:
        delay = ms - self.now_ms()
        if delay > 0:
            time.sleep(delay / 1000)
