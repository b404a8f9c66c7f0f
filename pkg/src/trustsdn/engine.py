"""Deterministic discrete-event engine: virtual clock, event queue, seeded RNG.

All simulated time is integer microseconds. Event dequeue order is
(time, insertion sequence), so simultaneous events replay identically
across runs.
"""

import hashlib
import heapq
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional

SimTime = int


class PastTimeError(Exception):
    """Raised when an event is scheduled before the current clock."""


class UnhandledEventKind(Exception):
    """Raised when a dequeued event has no registered handler."""


class DomainError(ValueError):
    """Raised for arguments outside their valid domain."""


class EventKind(str, Enum):
    PACKET_ARRIVAL = "PacketArrival"
    PACKET_IN = "PacketInToController"
    CONTROL_ACTION = "ControlAction"
    LINK_STATE_CHANGE = "LinkStateChange"
    TRUST_OVERRIDE = "TrustOverride"
    RECOVERY_TICK = "RecoveryTick"
    FLOW_EXPIRY = "FlowExpiry"
    SCENARIO_DIRECTIVE = "ScenarioDirective"


@dataclass
class Event:
    at: SimTime
    kind: EventKind
    payload: Any = None
    seq: int = -1  # assigned by Engine.schedule


class RngStream:
    """Independent deterministic random stream.

    The underlying generator is seeded from (seed, stream_id) via SHA-256,
    so the same pair yields the same draw sequence on any platform and
    adding new streams never perturbs existing ones.
    """

    def __init__(self, seed: int, stream_id: str):
        self.seed = seed
        self.stream_id = stream_id
        digest = hashlib.sha256(f"{seed}:{stream_id}".encode()).digest()
        self._rng = random.Random(int.from_bytes(digest[:8], "big"))

    def random(self) -> float:
        return self._rng.random()


def draw_bernoulli(stream: RngStream, p: float) -> bool:
    """True with probability p. Degenerate p in {0, 1} consumes no draw."""
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"probability out of [0,1]: {p}")
    if p <= 0.0:
        return False
    if p >= 1.0:
        return True
    return stream.random() < p


@dataclass
class TraceRecord:
    time_us: SimTime
    seq: int
    kind: str
    fields: Dict[str, Any] = field(default_factory=dict)

    def summary(self) -> str:
        return ";".join(f"{k}={v}" for k, v in self.fields.items())

    def line(self) -> str:
        return f"{self.time_us},{self.seq},{self.kind},{self.summary()}"


class Trace:
    """Append-only run trace; the single source for metrics and hashing."""

    def __init__(self):
        self.records: List[TraceRecord] = []

    def add(self, time_us: SimTime, kind: str, /, **fields: Any) -> TraceRecord:
        rec = TraceRecord(time_us, len(self.records), kind, fields)
        self.records.append(rec)
        return rec

    def dump_lines(self) -> List[str]:
        return [r.line() for r in self.records]

    def dump(self) -> str:
        return "\n".join(self.dump_lines()) + "\n"

    def sha256(self) -> str:
        return hashlib.sha256(self.dump().encode()).hexdigest()


class Engine:
    """Single-threaded event loop over a (time, seq)-ordered priority queue."""

    def __init__(self):
        self._now: SimTime = 0
        self._seq = 0
        self._queue: List[tuple] = []
        self._handlers: Dict[EventKind, Callable[[Event], None]] = {}

    def now(self) -> SimTime:
        return self._now

    def register(self, kind: EventKind, handler: Callable[[Event], None]) -> None:
        self._handlers[kind] = handler

    def schedule(self, event: Event) -> Event:
        if event.at < self._now:
            raise PastTimeError(
                f"cannot schedule {event.kind.value} at {event.at} (now={self._now})"
            )
        event.seq = self._seq
        self._seq += 1
        heapq.heappush(self._queue, (event.at, event.seq, event))
        return event

    def schedule_at(self, at: SimTime, kind: EventKind, payload: Any = None) -> Event:
        return self.schedule(Event(at=at, kind=kind, payload=payload))

    def pending(self) -> int:
        return len(self._queue)

    def run_until(self, t_end: SimTime) -> int:
        processed = 0
        while self._queue and self._queue[0][0] <= t_end:
            at, _seq, event = heapq.heappop(self._queue)
            self._now = at
            handler = self._handlers.get(event.kind)
            if handler is None:
                raise UnhandledEventKind(f"no handler for {event.kind.value}")
            handler(event)
            processed += 1
        if t_end > self._now:
            self._now = t_end
        return processed
