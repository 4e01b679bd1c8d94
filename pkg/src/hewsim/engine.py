"""Deterministic discrete-event scheduler and seeded random streams.

Events fire in (time, sequence) order where sequence is the insertion
counter.  Callbacks registered with ``defer`` run once after every event of
the current instant has fired ("end of instant"); the simulator uses this to
commit simultaneous backoff expiries before anybody re-senses the medium, so
the physics never depends on tie order.
"""
from __future__ import annotations

import enum
import heapq
from hashlib import blake2b

MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


class EventKind(enum.IntEnum):
    SLOT_BOUNDARY = 0
    TX_START = 1
    TX_END = 2
    TIMER_EXPIRY = 3
    TRAFFIC_ARRIVAL = 4


_KIND_NAMES = {k: k.name for k in EventKind}


class Event:
    __slots__ = ("time", "seq", "kind", "subject", "payload", "cancelled")

    def __init__(self, time, seq, kind, subject, payload):
        self.time = time
        self.seq = seq
        self.kind = kind
        self.subject = subject
        self.payload = payload
        self.cancelled = False

    def __lt__(self, other):
        return (self.time, self.seq) < (other.time, other.seq)

    def __repr__(self):
        return f"Event(t={self.time}, seq={self.seq}, {self.kind.name}, {self.subject!r})"


class Engine:
    """Single-threaded event loop with an integer nanosecond clock.

    reverse_ties flips the order of same-time events (LIFO instead of FIFO).
    It exists only so tests can show results do not depend on tie order.
    """

    def __init__(self, metrics=None, reverse_ties: bool = False):
        if metrics is None:
            from .analytics.metrics import MetricsRaw
            metrics = MetricsRaw()
        self.metrics = metrics
        self.now = 0
        self._heap: list = []
        self._seq = 0
        self._sign = -1 if reverse_ties else 1
        self._handlers = {}
        self._deferred: list = []
        self._deferred_keys: set = set()
        self.fired = 0

    def on(self, kind: EventKind, handler):
        self._handlers[kind] = handler

    def schedule(self, time: int, kind: EventKind, subject=None, payload=None) -> Event:
        if time < self.now:
            raise ValueError(f"cannot schedule {kind.name} at t={time} before clock {self.now}")
        self._seq += 1
        ev = Event(time, self._sign * self._seq, kind, subject, payload)
        heapq.heappush(self._heap, (time, ev.seq, ev))
        return ev

    @staticmethod
    def cancel(ev: Event | None):
        if ev is not None:
            ev.cancelled = True

    def defer(self, fn, key=None):
        """Run fn() once at the end of the current instant (deduplicated by key)."""
        key = fn if key is None else key
        if key in self._deferred_keys:
            return
        self._deferred_keys.add(key)
        self._deferred.append(fn)

    def _flush_deferred(self):
        while self._deferred:
            todo, self._deferred = self._deferred, []
            self._deferred_keys.clear()
            for fn in todo:
                fn()

    def run_until(self, t_end: int):
        """Fire every event with time < t_end, then set the clock to t_end."""
        heap = self._heap
        handlers = self._handlers
        counts = self.metrics.events
        names = _KIND_NAMES
        while True:
            if heap and heap[0][0] < t_end:
                t = heap[0][0]
                if t != self.now and self._deferred:
                    self._flush_deferred()
                    continue
                _, _, ev = heapq.heappop(heap)
                if ev.cancelled:
                    continue
                self.now = t
                self.fired += 1
                name = names[ev.kind]
                counts[name] = counts.get(name, 0) + 1
                handlers[ev.kind](ev)
            elif self._deferred:
                self._flush_deferred()
            else:
                break
        self.now = max(self.now, t_end)
        return self.metrics.snapshot()

    def pending(self) -> int:
        return sum(1 for _, _, ev in self._heap if not ev.cancelled)


class RandomStream:
    """SplitMix64 stream keyed by blake2b(seed|node|purpose).

    One call to next_u64 is one step.  Streams for different (node, purpose)
    start from unrelated 64-bit states, and SplitMix64's output mixer
    decorrelates even adjacent states.
    """

    __slots__ = ("state",)

    def __init__(self, seed: int, node: str, purpose: str):
        digest = blake2b(f"{seed}|{node}|{purpose}".encode(), digest_size=8).digest()
        self.state = int.from_bytes(digest, "little")

    def next_u64(self) -> int:
        self.state = z = (self.state + _GAMMA) & MASK64
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def uniform_int(self, n: int) -> int:
        if n < 1:
            raise ValueError("n must be >= 1")
        return (self.next_u64() * n) >> 64

    def random(self) -> float:
        """Float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))


def rng_uniform(stream: RandomStream, n: int) -> int:
    """Uniform integer in [0, n); consumes exactly one step of the stream."""
    return stream.uniform_int(n)
