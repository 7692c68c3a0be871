"""Parallel engines over a generic component-graph model.

A model exposes ``n_components``, ``seed``, ``neighbors(i)`` (the components
an update of ``i`` may read), ``rate(i)``, ``initial_state(i)`` and

    update(i, t, k, state, read, rng) -> (new_state, payload)

where ``read(j)`` returns the state of a declared neighbour as of just before
``(t, i)`` and ``rng`` is private to event ``k`` of component ``i``.  Arrival
times come from per-component Poisson clocks (or ``model.clock(i)`` when the
model provides one) and do not depend on state.

Engines:

* :func:`sequential_run` processes events in global ``(t, i)`` order and
  records the immediate causes of each event; it is the reference.
* :func:`lockstep_emulate` runs cautious advancement in synchronous cycles
  on one thread and reports the non-waiting fraction of every cycle.
* :func:`cautious_run` runs cautious advancement on worker threads.
* :func:`syncrelax_run` runs synchronous relaxation strip by strip.

All four produce the same committed event sequence for the same seed.
"""

from __future__ import annotations

import bisect
import math
import random
import threading
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Iterable, Mapping, Sequence

from .core.events import SimulationError, format_time
from .core.rng import PoissonClock, event_stream


class ContractViolation(SimulationError):
    """An update read a component outside its declared neighbour set."""


class EngineStalled(SimulationError):
    """The cautious engine made no progress within the watchdog window."""


class RelaxationDiverged(SimulationError):
    """Synchronous relaxation exceeded its iteration cap on one strip."""


class DependencyCycle(SimulationError):
    """An event dependency graph handed to :func:`count_levels` has a cycle."""


@dataclass(frozen=True)
class Event:
    time: float
    component: int
    index: int
    payload: Any = None

    @property
    def key(self) -> tuple[float, int]:
        return (self.time, self.component)


@dataclass
class RunResult:
    events: list[Event]
    states: list[Any]
    causes: dict[tuple[int, int], tuple[tuple[int, int], ...]] | None = None
    cycles: list[int] | None = None
    fractions: list[float] | None = None
    iterations: list[int] | None = None
    strips: list[tuple[float, float]] | None = None
    wall: float = 0.0

    def trajectory_rows(self) -> list[str]:
        return [f"{format_time(e.time)},{e.component},{e.index},{e.payload!r}" for e in self.events]

    def trajectory_csv(self) -> str:
        return "time,component,index,payload\n" + "".join(r + "\n" for r in self.trajectory_rows())

    @property
    def mean_fraction(self) -> float:
        return sum(self.fractions) / len(self.fractions) if self.fractions else float("nan")


def make_clock(model, i: int):
    custom = getattr(model, "clock", None)
    if custom is not None:
        return custom(i)
    return PoissonClock(model.seed, i, model.rate(i))


def wait_sets(model) -> list[frozenset[int]]:
    """Symmetrised neighbour sets: ``i`` waits on ``j`` if either reads the other."""
    n = model.n_components
    sets = [set() for _ in range(n)]
    for i in range(n):
        for j in model.neighbors(i):
            if not 0 <= j < n:
                raise ContractViolation(f"component {i} declares unknown neighbour {j}")
            if j != i:
                sets[i].add(j)
                sets[j].add(i)
    return [frozenset(s) for s in sets]


def _reader(i: int, allowed: frozenset[int], lookup: Callable[[int], Any], log: list | None):
    def read(j: int):
        if j != i and j not in allowed:
            raise ContractViolation(f"component {i} read undeclared component {j}")
        if log is not None:
            log.append(j)
        return lookup(j)
    return read


def _declared(model) -> list[frozenset[int]]:
    return [frozenset(model.neighbors(i)) for i in range(model.n_components)]


def sequential_run(model, horizon: float, record_causes: bool = True) -> RunResult:
    """Reference engine: one global queue in ``(t, i)`` order.

    Causes of event ``(i, k)`` are ``(i, k-1)`` plus the latest earlier event
    of every component its update actually read.
    """
    import heapq

    t0 = time.perf_counter()
    n = model.n_components
    declared = _declared(model)
    states = [model.initial_state(i) for i in range(n)]
    clocks = [make_clock(model, i) for i in range(n)]
    last = [-1] * n
    heap = [(c.time, i) for i, c in enumerate(clocks) if c.time < horizon]
    heapq.heapify(heap)
    events: list[Event] = []
    causes: dict | None = {} if record_causes else None
    while heap:
        t, i = heapq.heappop(heap)
        k = clocks[i].index
        reads: list[int] | None = [] if record_causes else None
        read = _reader(i, declared[i], states.__getitem__, reads)
        states[i], payload = model.update(i, t, k, states[i], read, event_stream(model.seed, i, k))
        events.append(Event(t, i, k, payload))
        if record_causes:
            cs = set()
            if k > 0:
                cs.add((i, k - 1))
            for j in reads:
                if last[j] >= 0:
                    cs.add((j, last[j]))
            causes[(i, k)] = tuple(sorted(cs))
        last[i] = k
        nt = clocks[i].advance()
        if nt < horizon:
            heapq.heappush(heap, (nt, i))
    return RunResult(events, states, causes=causes, wall=time.perf_counter() - t0)


def lockstep_emulate(model, horizon: float) -> RunResult:
    """Cautious advancement executed in synchronous cycles on one thread.

    In each cycle every unfinished component whose pending arrival precedes,
    in ``(t, i)`` order, the pending arrivals of all its neighbours advances.
    Such components are pairwise non-adjacent, so their updates commute.
    """
    t0 = time.perf_counter()
    n = model.n_components
    declared = _declared(model)
    waits = wait_sets(model)
    states = [model.initial_state(i) for i in range(n)]
    clocks = [make_clock(model, i) for i in range(n)]
    pending = [c.time if c.time < horizon else math.inf for c in clocks]
    unfinished = {i for i in range(n) if pending[i] < math.inf}
    events: list[Event] = []
    cycles: list[int] = []
    fractions: list[float] = []
    cycle = 0
    while unfinished:
        cycle += 1
        ready = sorted(
            (pending[i], i) for i in unfinished
            if all((pending[i], i) < (pending[j], j) for j in waits[i])
        )
        fractions.append(len(ready) / len(unfinished))
        for t, i in ready:
            k = clocks[i].index
            read = _reader(i, declared[i], states.__getitem__, None)
            states[i], payload = model.update(i, t, k, states[i], read, event_stream(model.seed, i, k))
            events.append(Event(t, i, k, payload))
            cycles.append(cycle)
            nt = clocks[i].advance()
            if nt < horizon:
                pending[i] = nt
            else:
                pending[i] = math.inf
                unfinished.discard(i)
    order = sorted(range(len(events)), key=lambda e: events[e].key)
    return RunResult(
        [events[e] for e in order], states,
        cycles=[cycles[e] for e in order], fractions=fractions,
        wall=time.perf_counter() - t0,
    )


def partition_blocks(n: int, parts: int) -> list[list[int]]:
    """Split ``range(n)`` into ``parts`` contiguous, nearly equal blocks."""
    parts = max(1, min(parts, n))
    base, extra = divmod(n, parts)
    out, start = [], 0
    for p in range(parts):
        size = base + (1 if p < extra else 0)
        out.append(list(range(start, start + size)))
        start += size
    return out


def cautious_run(model, horizon: float, workers: int = 1, watchdog: float = 30.0) -> RunResult:
    """Cautious advancement on ``workers`` threads, each owning a block of components.

    Every component publishes the time of its pending arrival.  A component
    processes that arrival only once its time precedes the published times
    of all its neighbours; a component with nothing left publishes ``inf``.
    """
    t0 = time.perf_counter()
    n = model.n_components
    declared = _declared(model)
    waits = wait_sets(model)
    states = [model.initial_state(i) for i in range(n)]
    clocks = [make_clock(model, i) for i in range(n)]
    published = [c.time if c.time < horizon else math.inf for c in clocks]
    per_component: list[list[Event]] = [[] for _ in range(n)]
    progress = [0]
    changed = threading.Condition()
    abort = threading.Event()
    errors: list[BaseException] = []

    def work(block: list[int]) -> None:
        try:
            while not abort.is_set():
                seen = progress[0]
                remaining = progressed = False
                for i in block:
                    t = published[i]
                    if t == math.inf:
                        continue
                    remaining = True
                    if not all((t, i) < (published[j], j) for j in waits[i]):
                        continue
                    k = clocks[i].index
                    read = _reader(i, declared[i], states.__getitem__, None)
                    states[i], payload = model.update(
                        i, t, k, states[i], read, event_stream(model.seed, i, k))
                    per_component[i].append(Event(t, i, k, payload))
                    nt = clocks[i].advance()
                    # state is written before the clock is published
                    published[i] = nt if nt < horizon else math.inf
                    with changed:
                        progress[0] += 1
                        changed.notify_all()
                    progressed = True
                if not remaining:
                    return
                if not progressed:
                    # sleep until some clock is republished (bounded, so a
                    # missed wake-up only costs latency)
                    with changed:
                        if progress[0] == seen:
                            changed.wait(0.01)
        except BaseException as exc:  # surfaced in the caller
            errors.append(exc)
            abort.set()

    threads = [threading.Thread(target=work, args=(b,), daemon=True)
               for b in partition_blocks(n, workers)]
    for th in threads:
        th.start()
    seen, last_change = -1, time.monotonic()
    while any(th.is_alive() for th in threads):
        for th in threads:
            th.join(timeout=0.05)
        if progress[0] != seen:
            seen, last_change = progress[0], time.monotonic()
        elif time.monotonic() - last_change > watchdog:
            abort.set()
            with changed:
                changed.notify_all()
            raise EngineStalled(f"no progress for {watchdog}s; clocks={published}")
    if errors:
        raise errors[0]
    events = sorted((e for evs in per_component for e in evs), key=lambda e: e.key)
    return RunResult(events, states, wall=time.perf_counter() - t0)


def default_step(model) -> float:
    """Strip width giving about four events per component per strip."""
    rates = [model.rate(i) for i in range(model.n_components)]
    mean = sum(rates) / len(rates)
    return 4.0 / mean if mean > 0 else math.inf


def iteration_cap(n: int) -> int:
    return 10 * math.ceil(math.log2(max(n, 1))) + 16


def syncrelax_run(
    model,
    horizon: float,
    dt_step: float | None = None,
    workers: int = 1,
    partitions: Sequence[Sequence[int]] | None = None,
    max_iterations: int | None = None,
) -> RunResult:
    """Synchronous relaxation with committed time advancing by ``dt_step``.

    Each partition plays one processing element.  Iteration 1 assumes every
    foreign component keeps its committed state through the strip; later
    iterations read the trajectories produced by the previous iteration.
    The iteration count of a strip is the smallest ``k`` whose output equals
    the output of iteration ``k+1``.  States must be immutable values with
    equality, because trajectories are compared exactly.
    """
    t0 = time.perf_counter()
    n = model.n_components
    if dt_step is None:
        dt_step = default_step(model)
    if not dt_step > 0:
        raise ValueError("dt_step must be positive")
    if partitions is None:
        partitions = [[i] for i in range(n)]
    flat = sorted(i for p in partitions for i in p)
    if flat != list(range(n)):
        raise ValueError("partitions must cover every component exactly once")
    cap = max_iterations if max_iterations is not None else iteration_cap(n)
    declared = _declared(model)
    owner = {i: p for p, part in enumerate(partitions) for i in part}
    committed = [model.initial_state(i) for i in range(n)]
    clocks = [make_clock(model, i) for i in range(n)]
    events: list[Event] = []
    iterations: list[int] = []
    strips: list[tuple[float, float]] = []
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None

    def generate(p: int, arrivals, prev) -> dict[int, list]:
        part = partitions[p]
        local = {i: committed[i] for i in part}
        out: dict[int, list] = {i: [] for i in part}
        merged = sorted((t, i, k) for i in part for t, k in arrivals[i])
        for t, i, k in merged:
            def lookup(j, t=t, i=i):
                if owner[j] == p:
                    return local[j]
                if prev is None:
                    return committed[j]
                keys, traj = prev[j]
                pos = bisect.bisect_left(keys, (t, i))
                return traj[pos - 1][3] if pos else committed[j]
            read = _reader(i, declared[i], lookup, None)
            new, payload = model.update(i, t, k, local[i], read, event_stream(model.seed, i, k))
            local[i] = new
            out[i].append((t, k, payload, new))
        return out

    def iterate(arrivals, prev) -> dict[int, list]:
        if pool is None:
            parts = [generate(p, arrivals, prev) for p in range(len(partitions))]
        else:
            parts = list(pool.map(lambda p: generate(p, arrivals, prev), range(len(partitions))))
        merged: dict[int, list] = {}
        for d in parts:
            merged.update(d)
        return merged

    def indexed(traj: dict[int, list]):
        return {j: ([(e[0], j) for e in tr], tr) for j, tr in traj.items()}

    try:
        lo = 0.0
        while lo < horizon:
            hi = min(lo + dt_step, horizon)
            arrivals = []
            for c in clocks:
                lst = []
                while c.time < hi:
                    lst.append((c.time, c.index))
                    c.advance()
                arrivals.append(lst)
            current = iterate(arrivals, None)
            k = 1
            while True:
                nxt = iterate(arrivals, indexed(current))
                if nxt == current:
                    break
                k += 1
                if k > cap:
                    raise RelaxationDiverged(
                        f"strip [{lo}, {hi}) did not converge within {cap} iterations")
                current = nxt
            iterations.append(k)
            strips.append((lo, hi))
            for i in range(n):
                for t, kk, payload, state in current[i]:
                    events.append(Event(t, i, kk, payload))
                if current[i]:
                    committed[i] = current[i][-1][3]
            lo = hi
    finally:
        if pool is not None:
            pool.shutdown()
    events.sort(key=lambda e: e.key)
    return RunResult(events, committed, iterations=iterations, strips=strips,
                     wall=time.perf_counter() - t0)


def count_levels(
    times: Mapping[Hashable, float],
    causes: Mapping[Hashable, Iterable[Hashable]],
    lo: float,
    hi: float,
) -> int:
    """Number of dependency levels among events with ``lo <= time < hi``.

    Events before ``lo`` are level 0.  A strip event's level is one more than
    the largest level among its immediate causes.  Returns the highest level
    present (0 for an empty strip).
    """
    strip = [e for e, t in times.items() if lo <= t < hi]
    inside = set(strip)
    indeg = {e: 0 for e in strip}
    children: dict[Hashable, list] = {e: [] for e in strip}
    for e in strip:
        for c in causes.get(e, ()):
            if c in inside:
                indeg[e] += 1
                children[c].append(e)
            elif c in times and times[c] >= hi:
                raise DependencyCycle(f"event {e!r} is caused by a later event {c!r}")
    level = {e: 1 for e in strip}
    queue = deque(e for e in strip if indeg[e] == 0)
    done = 0
    while queue:
        e = queue.popleft()
        done += 1
        for ch in children[e]:
            level[ch] = max(level[ch], level[e] + 1)
            indeg[ch] -= 1
            if indeg[ch] == 0:
                queue.append(ch)
    if done != len(strip):
        raise DependencyCycle("event dependency graph is not acyclic")
    return max(level.values(), default=0)


def strip_levels(reference: RunResult, strips: Sequence[tuple[float, float]]) -> list[int]:
    """Level count of each strip, from the causes recorded by :func:`sequential_run`."""
    if reference.causes is None:
        raise ValueError("reference run was made without cause recording")
    times = {(e.component, e.index): e.time for e in reference.events}
    return [count_levels(times, reference.causes, lo, hi) for lo, hi in strips]


# ---------------------------------------------------------------- workloads


class Decoupled:
    """Independent components: nobody reads anybody."""

    def __init__(self, n: int, rate: float = 1.0, seed: int = 0):
        self.n_components, self.seed, self._rate = n, seed, rate

    def neighbors(self, i):
        return ()

    def rate(self, i):
        return self._rate

    def initial_state(self, i):
        return 0

    def update(self, i, t, k, state, read, rng):
        step = rng.randbelow(1000)
        return state + step, step


class TokenRing:
    """One token travels around a ring; every event of the holder passes it on.

    Component ``i`` holds the token when its predecessor has passed it more
    often than ``i`` has (component 0 starts with it).  Each pass is caused by
    the previous pass, so passes inside a strip form one dependency chain.
    """

    def __init__(self, n: int, rate: float = 1.0, seed: int = 0):
        self.n_components, self.seed, self._rate = n, seed, rate

    def neighbors(self, i):
        return ((i - 1) % self.n_components,) if self.n_components > 1 else ()

    def rate(self, i):
        return self._rate

    def initial_state(self, i):
        return 0

    def holds(self, i, state, pred_state):
        return pred_state + (1 if i == 0 else 0) > state

    def update(self, i, t, k, state, read, rng):
        n = self.n_components
        pred = read((i - 1) % n) if n > 1 else state
        if self.holds(i, state, pred):
            return state + 1, "pass"
        return state, "idle"


class RandomSprinkle:
    """Random sparse dependency graph; each event reads a random subset of neighbours."""

    def __init__(self, n: int, degree: int = 2, rate: float = 1.0, seed: int = 0, graph_seed: int | None = None):
        self.n_components, self.seed, self._rate = n, seed, rate
        g = random.Random(seed if graph_seed is None else graph_seed)
        self._nbrs = []
        for i in range(n):
            others = [j for j in range(n) if j != i]
            self._nbrs.append(tuple(sorted(g.sample(others, min(degree, len(others))))))

    def neighbors(self, i):
        return self._nbrs[i]

    def rate(self, i):
        return self._rate

    def initial_state(self, i):
        return i

    def update(self, i, t, k, state, read, rng):
        acc = state * 31 + rng.randbelow(97)
        for j in self._nbrs[i]:
            if rng.uniform() < 0.5:
                acc += read(j)
        new = acc % 1_000_003
        return new, new


class ScriptedArrivals:
    """Wraps a model so component ``i`` arrives at the listed times only."""

    class _Clock:
        __slots__ = ("times", "index", "time")

        def __init__(self, times):
            self.times, self.index = list(times), 0
            self.time = self.times[0] if self.times else math.inf

        def advance(self):
            self.index += 1
            self.time = self.times[self.index] if self.index < len(self.times) else math.inf
            return self.time

    def __init__(self, model, arrivals: Sequence[Sequence[float]]):
        self.model = model
        self.arrivals = arrivals
        self.n_components = model.n_components
        self.seed = model.seed

    def clock(self, i):
        return self._Clock(self.arrivals[i])

    def __getattr__(self, name):
        return getattr(self.model, name)
