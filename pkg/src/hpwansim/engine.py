"""Deterministic discrete-event engine with integer-nanosecond virtual time.

The engine is single-threaded: one instance drives one trial. All randomness
flows through labeled streams derived from the trial's master seed, and draws
only happen inside event handlers, so the full event trace is a pure function
of (wiring, master seed).
"""

import hashlib
import heapq
import random
from dataclasses import dataclass

NS_PER_SEC = 1_000_000_000
NS_PER_MS = 1_000_000
NS_PER_US = 1_000

DEFAULT_EVENT_CAP = 5_000_000_000


class SimulationError(Exception):
    """Fatal simulation-level programming or safety-cap error."""


@dataclass
class EngineStats:
    events_executed: int
    final_time_ns: int


def derive_seed(master_seed: int, label: str) -> int:
    """Stable 64-bit sub-seed for (master_seed, label), identical across platforms."""
    digest = hashlib.sha256(f"{master_seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


class Engine:
    """Event queue ordered by (time, schedule-sequence).

    The sequence number both breaks ties deterministically and makes insertion
    order stable, so two events at the same instant fire in the order they
    were scheduled.
    """

    __slots__ = ("now", "event_cap", "events_executed", "master_seed",
                 "_heap", "_seq", "_streams")

    def __init__(self, master_seed: int = 0, event_cap: int = DEFAULT_EVENT_CAP):
        self.now = 0
        self.event_cap = event_cap
        self.events_executed = 0
        self.master_seed = master_seed
        self._heap = []
        self._seq = 0
        self._streams = {}

    def rng(self, label: str) -> random.Random:
        """Named random stream seeded by hash(master_seed, label).

        Repeated calls with the same label return the same stream object, so
        its state lineage is shared by all users of the label.
        """
        stream = self._streams.get(label)
        if stream is None:
            stream = random.Random(derive_seed(self.master_seed, label))
            self._streams[label] = stream
        return stream

    def schedule(self, t_ns: int, fn, arg=None) -> None:
        """Schedule fn(t_ns, arg). Hot path: no cancellation handle."""
        if t_ns < self.now:
            raise SimulationError(
                f"event scheduled in the past: t={t_ns} < now={self.now}")
        self._seq += 1
        heapq.heappush(self._heap, (t_ns, self._seq, fn, arg, None))

    def schedule_cancellable(self, t_ns: int, fn, arg=None) -> list:
        """Like schedule() but returns a handle; cancel(handle) before firing."""
        if t_ns < self.now:
            raise SimulationError(
                f"event scheduled in the past: t={t_ns} < now={self.now}")
        self._seq += 1
        handle = [False]
        heapq.heappush(self._heap, (t_ns, self._seq, fn, arg, handle))
        return handle

    @staticmethod
    def cancel(handle: list) -> None:
        handle[0] = True

    def pending(self) -> int:
        return len(self._heap)

    def run_until(self, stop_ns: int | None = None) -> EngineStats:
        """Fire events in order until the queue drains or virtual time passes
        stop_ns (inclusive: events at exactly stop_ns still fire)."""
        heap = self._heap
        pop = heapq.heappop
        cap = self.event_cap
        n = self.events_executed
        while heap:
            if stop_ns is not None and heap[0][0] > stop_ns:
                break
            t, _, fn, arg, handle = pop(heap)
            if handle is not None and handle[0]:
                continue
            self.now = t
            n += 1
            if n > cap:
                self.events_executed = n
                raise SimulationError(
                    f"event cap exceeded ({cap}); runaway loop suspected at t={t}")
            fn(t, arg)
        self.events_executed = n
        if stop_ns is not None and stop_ns > self.now:
            self.now = stop_ns
        return EngineStats(events_executed=n, final_time_ns=self.now)
