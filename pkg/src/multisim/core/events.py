"""Event descriptors, the pending-event queue and the CSV event log."""

from __future__ import annotations

import csv
import heapq
import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Iterable

#: Time of an event that will never happen (a postponed-to-infinity event).
NEVER = math.inf


class SimulationError(RuntimeError):
    """Base class for invariant and contract violations during a run."""


class CausalityError(SimulationError):
    """An event was scheduled before the committed simulation time."""


class NoPendingEvents(LookupError):
    """``pop`` was called on an empty event queue."""


def format_time(t: float) -> str:
    # repr round-trips a float exactly, which keeps logs byte-stable
    return "never" if t == NEVER else repr(float(t))


@dataclass
class EventDescriptor:
    time: float
    subject: int
    kind: str = ""
    payload: Any = None
    seq: int = field(default=-1, compare=False)
    cancelled: bool = field(default=False, compare=False, repr=False)


class EventQueue:
    """Binary-heap schedule ordered by ``(time, subject, insertion order)``.

    Popping advances the committed time; inserting an event earlier than the
    committed time raises :class:`CausalityError`.  Cancelled entries are
    dropped lazily when they reach the top of the heap.
    """

    def __init__(self):
        self._heap: list[tuple[float, int, int, EventDescriptor]] = []
        self._counter = itertools.count()
        self._live = 0
        self.now = 0.0

    def __len__(self):
        return self._live

    def __bool__(self):
        return self._live > 0

    def insert(self, event: EventDescriptor) -> EventDescriptor:
        if event.time < self.now:
            raise CausalityError(
                f"event at t={event.time!r} scheduled before committed time {self.now!r}"
            )
        event.seq = next(self._counter)
        event.cancelled = False
        heapq.heappush(self._heap, (event.time, event.subject, event.seq, event))
        self._live += 1
        return event

    def schedule(self, time: float, subject: int, kind: str = "", payload=None) -> EventDescriptor:
        return self.insert(EventDescriptor(time, subject, kind, payload))

    def cancel(self, event: EventDescriptor) -> None:
        if not event.cancelled:
            event.cancelled = True
            self._live -= 1

    def _drop_cancelled(self):
        heap = self._heap
        while heap and heap[0][3].cancelled:
            heapq.heappop(heap)

    def peek(self) -> EventDescriptor:
        self._drop_cancelled()
        if not self._heap:
            raise NoPendingEvents("no pending events")
        return self._heap[0][3]

    def pop(self) -> EventDescriptor:
        self._drop_cancelled()
        if not self._heap:
            raise NoPendingEvents("no pending events")
        event = heapq.heappop(self._heap)[3]
        self._live -= 1
        event.cancelled = True  # a popped event can no longer be cancelled
        self.now = event.time
        return event


def queue_insert(q: EventQueue, e: EventDescriptor) -> EventQueue:
    q.insert(e)
    return q


def queue_pop_min(q: EventQueue) -> EventDescriptor:
    return q.pop()


class EventLog:
    """Committed events as rows ``time,subject,event_kind,payload...``."""

    def __init__(self):
        self.rows: list[tuple] = []

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def __eq__(self, other):
        return isinstance(other, EventLog) and self.rows == other.rows

    def record(self, time: float, subject: int, kind: str, *payload) -> None:
        self.rows.append((time, subject, kind, *payload))

    def extend(self, rows: Iterable[tuple]) -> None:
        self.rows.extend(rows)

    def to_csv(self, header: Iterable[str] = ("time", "subject", "event_kind", "payload")) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in self.rows:
            w.writerow([format_time(row[0]), *(_fmt(v) for v in row[1:])])
        return buf.getvalue()

    def write(self, path, header=("time", "subject", "event_kind", "payload")) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv(header))


def _fmt(v):
    if isinstance(v, float):
        return format_time(v)
    return v
