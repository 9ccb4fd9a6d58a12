"""Virtual and wall clocks, both reporting integer milliseconds."""

from __future__ import annotations

import threading
import time


class VirtualClock:
    def __init__(self, start: int = 0):
        self._now = int(start)
        self._lock = threading.Lock()

    def now(self) -> int:
        return self._now

    def advance_to(self, t: int) -> None:
        with self._lock:
            if t < self._now:
                raise ValueError(f"virtual clock cannot move backwards ({t} < {self._now})")
            self._now = int(t)


class WallClock:
    """Milliseconds elapsed since construction, optionally sped up.

    ``advance_to`` sleeps until the requested simulated instant, so a
    pipeline written against ``VirtualClock`` runs unchanged in real time.
    """

    def __init__(self, speedup: float = 1.0):
        if speedup <= 0:
            raise ValueError("speedup must be positive")
        self.speedup = speedup
        self._t0 = time.monotonic()

    def now(self) -> int:
        return int((time.monotonic() - self._t0) * 1000.0 * self.speedup)

    def advance_to(self, t: int) -> None:
        delay = (t - self.now()) / (1000.0 * self.speedup)
        if delay > 0:
            time.sleep(delay)
