"""Exponential back-off on authentication failures.

Failure counters live in a table that is sealed (read-only) except inside an
update window, during which the simulated machine is halted. Counters never
reset on success, so interleaving legitimate calls cannot flush the history.
"""

from __future__ import annotations

import math
import threading
from contextlib import contextmanager


class SealedTableError(RuntimeError):
    """A sealed back-off table was written outside an update window."""


class BackoffTable:
    def __init__(self, base_delay: int = 1):
        if base_delay <= 0:
            raise ValueError("base_delay must be positive")
        self.base_delay = base_delay
        self._counters: dict[int, int] = {}
        self._sealed = True
        self.halted = False
        self._lock = threading.Lock()

    @property
    def sealed(self) -> bool:
        return self._sealed

    def failures(self, ctx: int) -> int:
        return self._counters.get(ctx, 0)

    @contextmanager
    def update_window(self):
        with self._lock:
            self.halted = True
            self._sealed = False
            try:
                yield self
            finally:
                self._sealed = True
                self.halted = False

    def increment(self, ctx: int) -> int:
        if self._sealed or not self.halted:
            raise SealedTableError("back-off table is sealed outside an update window")
        n = self._counters.get(ctx, 0) + 1
        self._counters[ctx] = n
        return n

    def snapshot(self) -> dict[int, int]:
        return dict(self._counters)


def backoff_gate(table: BackoffTable, ctx: int, authenticated: bool) -> int:
    """Return the delay imposed for one authentication outcome on ``ctx``."""
    if authenticated:
        return 0
    n = table.failures(ctx)
    delay = table.base_delay << n
    with table.update_window():
        table.increment(ctx)
    return delay


def cumulative_delay(base_delay: int, failures: int) -> int:
    """Total delay after ``failures`` consecutive failures: base * (2**n - 1)."""
    return base_delay * ((1 << failures) - 1)


def log2_delay(delay: int) -> float:
    return math.log2(delay) if delay > 0 else float("-inf")


def expected_bruteforce_attempts(pac_bits: int) -> float:
    """Mean attempts of a uniform search without replacement over 2**pac_bits codes."""
    return ((1 << pac_bits) + 1) / 2
