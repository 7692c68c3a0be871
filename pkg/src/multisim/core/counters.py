"""Anticipatory (event-maintained) versus lazy (scan-on-query) statistics.

:class:`MaintainedCounter` keeps a value current by applying per-event-kind
deltas as events are committed.  :class:`RetryingUsers` is a small
call-admission model used to exercise it: users arrive, take a free channel
if one exists and otherwise keep retrying; the reported statistic is the
number of users currently trying.
"""

from __future__ import annotations

from typing import Callable

from .events import EventQueue, NoPendingEvents
from .rng import RandomStream, exp_sample


class MaintainedCounter:
    def __init__(self, name: str = "counter", value: int = 0):
        self.name = name
        self.value = value
        self._hooks: dict[str, Callable[..., int]] = {}

    def on(self, kind: str, delta: int | Callable[..., int]) -> None:
        """Register how an event of ``kind`` changes the counter."""
        self._hooks[kind] = delta if callable(delta) else (lambda *_a, _d=delta: _d)

    def notify(self, kind: str, *args) -> None:
        hook = self._hooks.get(kind)
        if hook is not None:
            self.value += hook(*args)


def counter_query(c: MaintainedCounter, t: float | None = None) -> int:
    return c.value


def counter_lazy_scan(model, t: float | None = None) -> int:
    return model.lazy_scan()


IDLE, CONNECTED, TRYING = "idle", "connected", "trying"


class RetryingUsers:
    """Users competing for ``channels`` identical channels.

    Parameters are rates per second: ``arrival_rate`` for new users,
    ``1/mean_hold`` for call completion, ``retry_rate`` for the retrial
    clock of a blocked user.  A failed retrial makes the user give up with
    probability ``give_up``.
    """

    def __init__(self, channels: int, arrival_rate: float, mean_hold: float,
                 retry_rate: float, give_up: float = 0.2, seed: int = 0):
        self.channels = channels
        self.arrival_rate = arrival_rate
        self.mean_hold = mean_hold
        self.retry_rate = retry_rate
        self.give_up = give_up
        self.stream = RandomStream(seed, "retrying-users")
        self.status: dict[int, str] = {}
        self.busy = 0
        self.queue = EventQueue()
        self.trying = MaintainedCounter("trying")
        self.trying.on("blocked", +1)
        self.trying.on("late-connect", -1)
        self.trying.on("abandon", -1)
        self._next_user = 0
        if arrival_rate > 0:
            self.queue.schedule(exp_sample(self.stream, arrival_rate), -1, "arrival")

    def lazy_scan(self) -> int:
        return sum(1 for s in self.status.values() if s == TRYING)

    def _try_connect(self, user: int, t: float) -> bool:
        if self.busy < self.channels:
            self.busy += 1
            self.status[user] = CONNECTED
            self.queue.schedule(t + exp_sample(self.stream, 1.0 / self.mean_hold), user, "release")
            return True
        return False

    def _handle(self, ev) -> None:
        t = ev.time
        if ev.kind == "arrival":
            user = self._next_user
            self._next_user += 1
            if not self._try_connect(user, t):
                self.status[user] = TRYING
                self.trying.notify("blocked")
                self.queue.schedule(t + exp_sample(self.stream, self.retry_rate), user, "retry")
            self.queue.schedule(t + exp_sample(self.stream, self.arrival_rate), -1, "arrival")
        elif ev.kind == "release":
            self.busy -= 1
            del self.status[ev.subject]
        elif ev.kind == "retry":
            user = ev.subject
            if self._try_connect(user, t):
                self.trying.notify("late-connect")
            elif self.stream.uniform() < self.give_up:
                del self.status[user]
                self.trying.notify("abandon")
            else:
                self.queue.schedule(t + exp_sample(self.stream, self.retry_rate), user, "retry")

    def run(self, horizon: float, report_dt: float) -> list[tuple[float, int, int]]:
        """Run to ``horizon``; return ``(t, maintained, lazy)`` at each report instant."""
        reports = []
        t_report = 0.0
        k = 0
        while t_report <= horizon:
            while True:
                try:
                    ev = self.queue.peek()
                except NoPendingEvents:
                    break
                if ev.time > t_report:
                    break
                self._handle(self.queue.pop())
            reports.append((t_report, counter_query(self.trying, t_report),
                            counter_lazy_scan(self, t_report)))
            k += 1
            t_report = k * report_dt
        return reports
