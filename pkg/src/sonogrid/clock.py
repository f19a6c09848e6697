"""Injectable time source so schedulers and staleness are testable."""

from __future__ import annotations

import threading
import time


class SystemClock:
    """Wall clock; waits are interruptible through the stop event."""

    def now_ms(self) -> int:
        return time.time_ns() // 1_000_000

    def wait_until(self, deadline_ms: int, stop: threading.Event | None = None) -> bool:
        """Block until the deadline. Returns False if stopped early."""
        while True:
            remaining = (deadline_ms - self.now_ms()) / 1000.0
            if remaining <= 0:
                return True
            if stop is None:
                time.sleep(min(remaining, 0.2))
            elif stop.wait(min(remaining, 0.2)):
                return False

    def sleep_ms(self, ms: float, stop: threading.Event | None = None) -> bool:
        return self.wait_until(self.now_ms() + int(ms), stop)


class ManualClock:
    """Test clock: waits never block, they jump time to the deadline."""

    def __init__(self, start_ms: int = 0):
        self._now_ms = start_ms
        self._lock = threading.Lock()

    def now_ms(self) -> int:
        with self._lock:
            return self._now_ms

    def advance_ms(self, ms: int) -> None:
        with self._lock:
            self._now_ms += ms

    def wait_until(self, deadline_ms: int, stop: threading.Event | None = None) -> bool:
        if stop is not None and stop.is_set():
            return False
        with self._lock:
            self._now_ms = max(self._now_ms, deadline_ms)
        return True

    def sleep_ms(self, ms: float, stop: threading.Event | None = None) -> bool:
        return self.wait_until(self.now_ms() + int(ms), stop)
