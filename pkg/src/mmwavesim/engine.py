"""Deterministic discrete-event scheduler and seeded random-number streams.

Time is kept as integer nanoseconds so a 60 s run with microsecond-scale
slots never accumulates float drift.  Events with equal firing time run
in insertion order (FIFO tie-break).
"""

from __future__ import annotations

import hashlib
import heapq

import numpy as np

NS_PER_US = 1_000
NS_PER_MS = 1_000_000
NS_PER_SEC = 1_000_000_000


def seconds(t_ns: int) -> float:
    """Nanosecond tick to float seconds (for reporting only)."""
    return t_ns / NS_PER_SEC


def from_seconds(t_s: float) -> int:
    return int(round(t_s * NS_PER_SEC))


class SimulationLimitError(RuntimeError):
    """Raised when a run exceeds the runaway event-count guard."""


class EventHandle:
    __slots__ = ("fire_at", "seq", "action", "cancelled")

    def __init__(self, fire_at: int, seq: int, action):
        self.fire_at = fire_at
        self.seq = seq
        self.action = action
        self.cancelled = False

    def cancel(self) -> None:
        """Idempotent: cancelling twice (or after firing) is a no-op."""
        self.cancelled = True


class Scheduler:
    """Single-threaded event loop owning the whole simulated world."""

    def __init__(self, event_cap: int = 1_000_000_000):
        self.now: int = 0
        self.event_cap = event_cap
        self.executed = 0
        self._heap: list[tuple[int, int, EventHandle]] = []
        self._seq = 0

    def schedule(self, delay_ns: int, action) -> EventHandle:
        if delay_ns < 0:
            raise ValueError(f"negative delay {delay_ns}")
        handle = EventHandle(self.now + delay_ns, self._seq, action)
        heapq.heappush(self._heap, (handle.fire_at, handle.seq, handle))
        self._seq += 1
        return handle

    def schedule_at(self, t_ns: int, action) -> EventHandle:
        return self.schedule(t_ns - self.now, action)

    def run_until(self, t_end_ns: int) -> int:
        """Run every event with fire_at <= t_end; leave now == t_end.

        Returns the number of events executed by this call.
        """
        if t_end_ns < self.now:
            raise ValueError("t_end lies in the past")
        ran = 0
        heap = self._heap
        while heap and heap[0][0] <= t_end_ns:
            fire_at, _, handle = heapq.heappop(heap)
            if handle.cancelled:
                continue
            assert fire_at >= self.now, "event queued in the past"
            self.now = fire_at
            self.executed += 1
            ran += 1
            if self.executed > self.event_cap:
                raise SimulationLimitError(
                    f"event cap {self.event_cap} exceeded at t={seconds(self.now):.6f}s"
                )
            handle.action()
        self.now = t_end_ns
        return ran


def _stream_key(seed: int, stream_id: str) -> np.random.SeedSequence:
    # sha256 keeps the (seed, stream_id) -> sequence map stable across
    # platforms and python hash randomization.
    digest = hashlib.sha256(stream_id.encode("utf-8")).digest()
    words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
    return np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF] + words)


class RandomStreams:
    """One named deterministic RNG stream per stochastic subsystem.

    Identical (seed, stream_id) always yields the identical draw sequence,
    so e.g. changing the fading model leaves scenario shadowing untouched.
    """

    def __init__(self, seed: int):
        self.seed = seed
        self._streams: dict[str, np.random.Generator] = {}

    def register(self, stream_id: str) -> np.random.Generator:
        if stream_id not in self._streams:
            self._streams[stream_id] = np.random.Generator(
                np.random.PCG64(_stream_key(self.seed, stream_id))
            )
        return self._streams[stream_id]

    def get(self, stream_id: str) -> np.random.Generator:
        try:
            return self._streams[stream_id]
        except KeyError:
            raise KeyError(f"unknown rng stream {stream_id!r}") from None

    def uniform(self, stream_id: str) -> float:
        """Next value in [0, 1) of a registered stream."""
        return float(self.get(stream_id).random())
