"""One-dimensional gutter billiards.

``N`` equal hard balls move between two walls and exchange velocities on
contact.  Three engines are provided:

* :func:`run_timedriven` advances every ball by ``dt`` and resolves the
  overlaps found at the end of each step;
* :func:`run_anticipatory` keeps, for every ball, both of its candidate
  events (left and right neighbour or wall); when one candidate is
  preempted the other is already known;
* :func:`run_lazy` keeps one event per ball; a ball whose scheduled partner
  is stolen gets an *advancement* event at the discarded collision time and
  looks for a new partner then.

In *swelling* mode all diameters grow as ``D(t) = D0 + g*t``; collisions
then add the growth speed on separation, so the system approaches a jammed
state where the free length ``L - N*D(t)`` vanishes.

Ball positions inside the event-driven engines are stored as an anchor
``(x0, t0)`` set at the last velocity change.  Every predicted time is a
pure function of the anchors, which is what makes the two event-driven
schedulers agree bit for bit.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core.events import NEVER, EventLog, SimulationError
from .core.rng import RandomStream
from .core.stepper import timedriven_run

PAIR, WALL, ADVANCE = "pair", "wall", "advance"
_CODE = {PAIR: 0, WALL: 1, ADVANCE: 2}
OVERLAP_TOL = 1e-9


class OverlapError(SimulationError):
    """Two balls (or a ball and a wall) interpenetrate."""


@dataclass
class Ball:
    index: int
    x: float
    v: float
    last_update: float = 0.0


@dataclass
class GutterConfig:
    x: list[float]
    v: list[float]
    diameter: float = 1.0
    x_left: float = 0.0
    x_right: float = 10.0
    growth: float = 0.0
    jam_tol: float = 1e-9

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def length(self) -> float:
        return self.x_right - self.x_left

    def diameter_at(self, t: float) -> float:
        return self.diameter + self.growth * t

    def jam_time(self) -> float:
        """Time at which ``N*D(t)`` fills the gutter (``NEVER`` without growth)."""
        if self.growth <= 0 or self.n == 0:
            return NEVER
        return (self.length / self.n - self.diameter) / self.growth

    def validate(self) -> None:
        if len(self.v) != self.n:
            raise ValueError("x and v must have equal length")
        if self.x_left >= self.x_right:
            raise ValueError("x_left must be below x_right")
        if self.n * self.diameter >= self.length:
            raise ValueError("balls do not fit in the gutter")
        d = self.diameter
        for i in range(self.n):
            lo = self.x_left if i == 0 else self.x[i - 1] + d / 2
            if self.x[i] - d / 2 < lo - OVERLAP_TOL:
                raise OverlapError(f"ball {i} overlaps its left neighbour or wall")
        if self.n and self.x[-1] + d / 2 > self.x_right + OVERLAP_TOL:
            raise OverlapError("last ball overlaps the right wall")


def random_gutter(n: int, seed: int, diameter: float = 1.0, length: float | None = None,
                  vmax: float = 1.0, growth: float = 0.0) -> GutterConfig:
    """Non-overlapping random start: Dirichlet free gaps, uniform velocities."""
    if length is None:
        length = 2.0 * n * diameter + diameter
    s = RandomStream(seed, "gutter")
    free = length - n * diameter
    w = [-math.log(s.uniform()) for _ in range(n + 1)]
    tot = sum(w)
    x, pos = [], 0.0
    for i in range(n):
        pos += free * w[i] / tot
        x.append(pos + diameter / 2 + i * diameter)
    v = [vmax * (2 * s.uniform() - 1) for _ in range(n)]
    return GutterConfig(x=x, v=v, diameter=diameter, x_left=0.0, x_right=length, growth=growth)


# ---------------------------------------------------------------- single-step ops

def free_advance(b: Ball, t: float) -> Ball:
    if t < b.last_update:
        raise ValueError(f"cannot advance ball {b.index} backwards to t={t}")
    return replace(b, x=b.x + b.v * (t - b.last_update), last_update=t)


def predict_pair_collision(b_i: Ball, b_j: Ball, diameter: float, now: float,
                           growth: float = 0.0) -> float:
    """Contact time of adjacent balls ``i < j``; ``diameter`` is ``D`` at t=0."""
    closing = b_i.v - b_j.v + growth
    if closing <= 0:
        return NEVER
    xi = b_i.x + b_i.v * (now - b_i.last_update)
    xj = b_j.x + b_j.v * (now - b_j.last_update)
    gap = xj - xi - (diameter + growth * now)
    if gap < -OVERLAP_TOL:
        raise OverlapError(f"balls {b_i.index},{b_j.index} overlap by {-gap}")
    return now + max(gap, 0.0) / closing


def resolve_collision(b_i: Ball, b_j: Ball, growth: float = 0.0) -> tuple[Ball, Ball]:
    """Exchange velocities; with growth the separating pair also gains ``g``."""
    return replace(b_i, v=b_j.v - growth), replace(b_j, v=b_i.v + growth)


# ---------------------------------------------------------------- shared machinery

@dataclass
class BilliardsResult:
    events: list[tuple]  # (time, kind, a, b) committed physical events
    x: list[float]
    v: list[float]
    t_end: float
    status: str = "horizon"
    advancements: int = 0
    trajectories: dict[int, list[tuple[float, float, float]]] = field(default_factory=dict)

    def event_log(self) -> EventLog:
        log = EventLog()
        for t, kind, a, b in self.events:
            log.record(t, a, kind, b)
        return log

    def final_state_csv(self) -> str:
        lines = ["ball,x,v"]
        lines += [f"{i},{x!r},{v!r}" for i, (x, v) in enumerate(zip(self.x, self.v))]
        return "\n".join(lines) + "\n"


class _Gutter:
    """Anchored ball state plus the prediction functions both schedulers use."""

    def __init__(self, cfg: GutterConfig, record: bool):
        cfg.validate()
        self.cfg = cfg
        self.n = cfg.n
        self.x0 = [float(x) for x in cfg.x]
        self.t0 = [0.0] * self.n
        self.v = [float(v) for v in cfg.v]
        self.d0 = cfg.diameter
        self.g = cfg.growth
        self.xl, self.xr = cfg.x_left, cfg.x_right
        self.events: list[tuple] = []
        self.record = record
        self.traj = {i: [(0.0, self.x0[i], self.v[i])] for i in range(self.n)} if record else {}

    def pos(self, i: int, t: float) -> float:
        return self.x0[i] + self.v[i] * (t - self.t0[i])

    def pair_time(self, i: int) -> float:
        j = i + 1
        closing = self.v[i] - self.v[j] + self.g
        if closing <= 0:
            return NEVER
        tr = self.t0[i] if self.t0[i] > self.t0[j] else self.t0[j]
        gap = self.pos(j, tr) - self.pos(i, tr) - (self.d0 + self.g * tr)
        if gap < -OVERLAP_TOL:
            raise OverlapError(f"balls {i},{j} overlap by {-gap} at t={tr}")
        return tr + (gap if gap > 0 else 0.0) / closing

    def left_wall_time(self) -> float:
        closing = -self.v[0] + self.g / 2
        if closing <= 0:
            return NEVER
        t0 = self.t0[0]
        gap = self.x0[0] - (self.d0 + self.g * t0) / 2 - self.xl
        if gap < -OVERLAP_TOL:
            raise OverlapError("ball 0 penetrates the left wall")
        return t0 + (gap if gap > 0 else 0.0) / closing

    def right_wall_time(self) -> float:
        b = self.n - 1
        closing = self.v[b] + self.g / 2
        if closing <= 0:
            return NEVER
        t0 = self.t0[b]
        gap = self.xr - self.x0[b] - (self.d0 + self.g * t0) / 2
        if gap < -OVERLAP_TOL:
            raise OverlapError(f"ball {b} penetrates the right wall")
        return t0 + (gap if gap > 0 else 0.0) / closing

    def _rebase(self, i: int, t: float, v_new: float) -> None:
        self.x0[i] = self.pos(i, t)
        self.t0[i] = t
        self.v[i] = v_new
        if self.record:
            self.traj[i].append((t, self.x0[i], v_new))

    def do_pair(self, t: float, i: int) -> None:
        j = i + 1
        vi, vj = self.v[i], self.v[j]
        self._rebase(i, t, vj - self.g)
        self._rebase(j, t, vi + self.g)
        self.events.append((t, PAIR, i, j))

    def do_wall(self, t: float, b: int, side: int) -> None:
        if side < 0:
            self._rebase(b, t, -self.v[b] + self.g)
        else:
            self._rebase(b, t, -self.v[b] - self.g)
        self.events.append((t, WALL, b, side))

    def free_length(self, t: float) -> float:
        return (self.xr - self.xl) - self.n * (self.d0 + self.g * t)

    def stop_reason(self, t: float, horizon: float) -> str | None:
        if t > horizon:
            return "horizon"
        if self.g > 0 and (t >= self.cfg.jam_time() or self.free_length(t) <= self.cfg.jam_tol):
            return "jammed"
        return None

    def result(self, t_end: float, status: str, advancements: int = 0) -> BilliardsResult:
        x = [self.pos(i, t_end) for i in range(self.n)]
        return BilliardsResult(self.events, x, list(self.v), t_end, status, advancements, self.traj)


def _jam_end(g: _Gutter, horizon: float) -> float:
    return min(horizon, g.cfg.jam_time()) if g.g > 0 else horizon


# ---------------------------------------------------------------- anticipatory

class AnticipatoryGutter(_Gutter):
    """Every ball keeps both candidate events; slots are shared between balls.

    Slot ``i`` (``0 <= i < n-1``) is the pair ``(i, i+1)``; slot ``n-1`` is
    ball 0 against the left wall and slot ``n`` the last ball against the
    right wall.
    """

    def __init__(self, cfg, record):
        super().__init__(cfg, record)
        n = self.n
        self.LEFT, self.RIGHT = n - 1, n
        self.slot_time = [NEVER] * (n + 1)
        self.version = [0] * (n + 1)
        self.heap: list[tuple] = []

    def left_slot(self, b):
        return b - 1 if b > 0 else self.LEFT

    def right_slot(self, b):
        return b if b < self.n - 1 else self.RIGHT

    def candidates(self, b: int) -> tuple[float, float]:
        return self.slot_time[self.left_slot(b)], self.slot_time[self.right_slot(b)]

    def best_candidate(self, b: int) -> float:
        return min(self.candidates(b))

    def _key(self, s: int):
        if s == self.LEFT:
            return 0, 1
        if s == self.RIGHT:
            return self.n - 1, 1
        return s, 0

    def refresh(self, s: int) -> None:
        if s == self.LEFT:
            t = self.left_wall_time()
        elif s == self.RIGHT:
            t = self.right_wall_time()
        else:
            t = self.pair_time(s)
        self.version[s] += 1
        self.slot_time[s] = t
        if t != NEVER:
            low, code = self._key(s)
            heapq.heappush(self.heap, (t, low, code, s, self.version[s]))

    def run(self, horizon: float, max_events: int | None) -> BilliardsResult:
        if self.n == 0:
            return self.result(horizon, "horizon")
        for s in range(self.n + 1):  # with one ball these are just the two walls
            self.refresh(s)
        count = 0
        while self.heap:
            t, _low, _code, s, ver = self.heap[0]
            if ver != self.version[s]:
                heapq.heappop(self.heap)
                continue
            reason = self.stop_reason(t, horizon)
            if reason:
                return self.result(_jam_end(self, horizon) if reason == "jammed" else horizon, reason)
            if max_events is not None and count >= max_events:
                return self.result(t, "max-events")
            heapq.heappop(self.heap)
            if s == self.LEFT:
                self.do_wall(t, 0, -1)
                touched = (0,)
            elif s == self.RIGHT:
                self.do_wall(t, self.n - 1, +1)
                touched = (self.n - 1,)
            else:
                self.do_pair(t, s)
                touched = (s, s + 1)
            count += 1
            for s2 in sorted({f(b) for b in touched for f in (self.left_slot, self.right_slot)}):
                self.refresh(s2)
        return self.result(_jam_end(self, horizon), "horizon")


# ---------------------------------------------------------------- lazy

class _Ev:
    __slots__ = ("t", "low", "code", "kind", "a", "b", "side", "alive")

    def __init__(self, t, kind, a, b=-1, side=0):
        self.t, self.kind, self.a, self.b, self.side = t, kind, a, b, side
        self.low = a if b < 0 else min(a, b)
        self.code = _CODE[kind]
        self.alive = True

    def key(self):
        return self.t, self.low, self.code


class LazyGutter(_Gutter):
    """One scheduled event per ball; preempted partners get advancements."""

    def __init__(self, cfg, record):
        super().__init__(cfg, record)
        self.ev: list[_Ev | None] = [None] * self.n
        self.heap: list[tuple] = []
        self.seq = itertools.count()
        self.advancements = 0
        self.last_update = [0.0] * self.n

    def _push(self, e: _Ev) -> None:
        heapq.heappush(self.heap, (e.t, e.low, e.code, next(self.seq), e))

    def _assign_advance(self, m: int, t: float) -> None:
        e = _Ev(t, ADVANCE, m)
        self.ev[m] = e
        self._push(e)

    def find_new_event(self, b: int) -> None:
        best = None
        if b == 0:
            t = self.left_wall_time()
            if t != NEVER:
                best = _Ev(t, WALL, b, side=-1)
        else:
            k = b - 1
            t = self.pair_time(k)
            if t != NEVER:
                cand = _Ev(t, PAIR, k, b)
                if self.ev[k] is None or cand.key() < self.ev[k].key():
                    best = cand
        if b == self.n - 1:
            t = self.right_wall_time()
            if t != NEVER:
                cand = _Ev(t, WALL, b, side=+1)
                if best is None or cand.key() < best.key():
                    best = cand
        else:
            k = b + 1
            t = self.pair_time(b)
            if t != NEVER:
                cand = _Ev(t, PAIR, b, k)
                if (self.ev[k] is None or cand.key() < self.ev[k].key()) and (
                        best is None or cand.key() < best.key()):
                    best = cand
        self.ev[b] = best
        if best is None:
            return
        if best.kind == PAIR:
            k = best.b if best.a == b else best.a
            old = self.ev[k]
            if old is not None:
                old.alive = False
                if old.kind == PAIR:
                    m = old.b if old.a == k else old.a
                    self._assign_advance(m, old.t)
            self.ev[k] = best
        self._push(best)

    def schedule_initial(self) -> None:
        for b in range(self.n):
            if self.ev[b] is None:
                self.find_new_event(b)
        # the last ball may have been claimed by a pair before its wall was seen
        last = self.n - 1
        cur = self.ev[last]
        t = self.right_wall_time()
        if cur is not None and cur.kind == PAIR and t != NEVER:
            cand = _Ev(t, WALL, last, side=+1)
            if cand.key() < cur.key():
                cur.alive = False
                self._assign_advance(cur.a, cur.t)
                self.ev[last] = cand
                self._push(cand)

    def run(self, horizon: float, max_events: int | None) -> BilliardsResult:
        if self.n == 0:
            return self.result(horizon, "horizon")
        self.schedule_initial()
        count = 0
        while self.heap:
            t, _low, _code, _seq, e = self.heap[0]
            if not e.alive:
                heapq.heappop(self.heap)
                continue
            reason = self.stop_reason(t, horizon)
            if reason:
                return self.result(_jam_end(self, horizon) if reason == "jammed" else horizon,
                                   reason, self.advancements)
            if e.kind != ADVANCE and max_events is not None and count >= max_events:
                return self.result(t, "max-events", self.advancements)
            heapq.heappop(self.heap)
            e.alive = False
            if e.kind == ADVANCE:
                self.advancements += 1
                self.last_update[e.a] = t  # anchor unchanged: position is x0 + v*(t - t0)
                self.ev[e.a] = None
                self.find_new_event(e.a)
                continue
            count += 1
            if e.kind == WALL:
                self.do_wall(t, e.a, e.side)
                self.ev[e.a] = None
                self.find_new_event(e.a)
            else:
                self.do_pair(t, e.a)
                self.ev[e.a] = self.ev[e.b] = None
                self.find_new_event(e.a)
                self.find_new_event(e.b)
        return self.result(_jam_end(self, horizon), "horizon", self.advancements)


def run_anticipatory(cfg: GutterConfig, horizon: float, max_events: int | None = None,
                     record: bool = False) -> BilliardsResult:
    return AnticipatoryGutter(cfg, record).run(horizon, max_events)


def run_lazy(cfg: GutterConfig, horizon: float, max_events: int | None = None,
             record: bool = False) -> BilliardsResult:
    return LazyGutter(cfg, record).run(horizon, max_events)


# ---------------------------------------------------------------- time-driven

class TimeDrivenGutter:
    """Vectorised fixed-step gutter; at most one collision per ball per step."""

    def __init__(self, cfg: GutterConfig):
        cfg.validate()
        self.cfg = cfg
        self.x = np.array(cfg.x, dtype=float)
        self.v = np.array(cfg.v, dtype=float)
        self.events: list[tuple] = []

    def advance(self, dt: float) -> None:
        self.x += self.v * dt

    def detect(self, t: float) -> None:
        x, v, cfg = self.x, self.v, self.cfg
        n = len(x)
        if n == 0:
            return
        g = cfg.growth
        d = cfg.diameter + g * t
        hits = []
        if n > 1:
            gaps = x[1:] - x[:-1]
            idx = np.flatnonzero((gaps < d) & (v[:-1] - v[1:] + g > 0))
            hits = idx.tolist()
        used = set()
        if x[0] - d / 2 < cfg.x_left and v[0] - g / 2 < 0:
            v[0] = -v[0] + g
            used.add(0)
            self.events.append((t, WALL, 0, -1))
        for i in hits:
            if i in used or i + 1 in used:
                continue
            v[i], v[i + 1] = v[i + 1] - g, v[i] + g
            used.update((i, i + 1))
            self.events.append((t, PAIR, int(i), int(i + 1)))
        b = n - 1
        if b not in used and x[b] + d / 2 > cfg.x_right and v[b] + g / 2 > 0:
            v[b] = -v[b] - g
            self.events.append((t, WALL, b, 1))

    def trajectory(self) -> BilliardsResult:
        return BilliardsResult(self.events, self.x.tolist(), self.v.tolist(), 0.0, "horizon")


def run_timedriven(cfg: GutterConfig, dt: float, horizon: float) -> BilliardsResult:
    model = TimeDrivenGutter(cfg)
    res = timedriven_run(model, dt, horizon)
    res.t_end = horizon
    return res


def compare_logs(approx: list[tuple], exact: list[tuple], time_tol: float) -> tuple[bool, float]:
    """Match events by identity ``(kind, a, b)`` in order of occurrence.

    Returns ``(agree, worst time error)``; logs agree when every identity
    occurs equally often in both and each matched pair of times is within
    ``time_tol``.
    """
    def group(events):
        out: dict[tuple, list[float]] = {}
        for t, kind, a, b in sorted(events, key=lambda e: e[0]):
            out.setdefault((kind, a, b), []).append(t)
        return out

    ga, ge = group(approx), group(exact)
    if ga.keys() != ge.keys() or any(len(ga[k]) != len(ge[k]) for k in ga):
        return False, math.inf
    worst = max((abs(x - y) for k in ga for x, y in zip(ga[k], ge[k])), default=0.0)
    return worst <= time_tol, worst
