"""Circuit-switched, fully connected network with least-busy alternate routing.

A call between ``n1`` and ``n2`` takes the direct link when it has an idle
trunk.  Otherwise it overflows to a two-link path through a via ``v``:

* LBA picks the via maximising ``min(idle(n1, v), idle(v, n2))`` and blocks
  when that maximum is zero.
* ALBA picks, among vias with an idle trunk on both legs, the one whose path
  load class (the smaller of its two link classes) is lowest.

Both policies break ties by the smallest via index and have a lazy
evaluator (scan all vias on demand) and an anticipatory one (per-pair index
kept current on every trunk change).
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Sequence

from .core.events import SimulationError
from .core.rng import PoissonClock, event_stream

BLOCKED = "blocked"
DIRECT = "direct"


class UnknownCall(SimulationError):
    """Release of a call that is not being carried."""


def pair_index(a: int, b: int, n: int) -> int:
    """Index of unordered pair ``{a, b}`` in lexicographic order of ``(min, max)``."""
    if a == b:
        raise ValueError("a pair needs two distinct nodes")
    if a > b:
        a, b = b, a
    return a * (2 * n - a - 1) // 2 + (b - a - 1)


def pairs_of(n: int) -> list[tuple[int, int]]:
    return [(a, b) for a in range(n) for b in range(a + 1, n)]


class LoadClassScheme:
    """Occupancy bands ``[g_{i-1}, g_i)``; class ``K`` also holds full links.

    ``boundaries`` lists the interior points ``g_1 < ... < g_{K-1}`` in
    ``(0, 1)``; classes are numbered from 1.
    """

    def __init__(self, boundaries: Sequence[float]):
        b = [float(x) for x in boundaries]
        if any(not 0.0 < x < 1.0 for x in b) or any(x >= y for x, y in zip(b, b[1:])):
            raise ValueError("boundaries must be strictly increasing inside (0, 1)")
        self.boundaries = b
        self.k = len(b) + 1

    def classify(self, occupied: int, capacity: int) -> int:
        if capacity <= 0 or occupied >= capacity:
            return self.k
        return bisect.bisect_right(self.boundaries, occupied / capacity) + 1


class Network:
    """Complete graph on ``n`` nodes with per-link trunk capacities."""

    def __init__(self, n: int, capacity: int | Sequence[int]):
        if n < 2:
            raise ValueError("a network needs at least two nodes")
        self.n = n
        self.n_links = n * (n - 1) // 2
        if isinstance(capacity, int):
            capacity = [capacity] * self.n_links
        if len(capacity) != self.n_links or any(c < 0 for c in capacity):
            raise ValueError("need one nonnegative capacity per link")
        self.capacity = [int(c) for c in capacity]
        self.occupied = [0] * self.n_links
        self.listeners: list = []

    def link(self, a: int, b: int) -> int:
        return pair_index(a, b, self.n)

    def idle(self, a: int, b: int) -> int:
        l = self.link(a, b)
        return self.capacity[l] - self.occupied[l]

    def change(self, l: int, delta: int) -> None:
        o = self.occupied[l] + delta
        if not 0 <= o <= self.capacity[l]:
            raise SimulationError(f"link {l} occupancy would become {o}")
        self.occupied[l] = o
        for fn in self.listeners:
            fn(l)

    def snapshot(self) -> tuple[int, ...]:
        return tuple(self.occupied)


def lba_select_via(net: Network, n1: int, n2: int) -> int | None:
    """Lazy LBA: the via with the most idle capacity on its bottleneck leg."""
    best, best_v = 0, None
    for v in range(net.n):
        if v == n1 or v == n2:
            continue
        val = min(net.idle(n1, v), net.idle(v, n2))
        if val > best:
            best, best_v = val, v
    return best_v


def alba_select_via(net: Network, scheme: LoadClassScheme, n1: int, n2: int) -> int | None:
    """Lazy ALBA: the usable via with the lowest path class (min of leg classes)."""
    best, best_v = math.inf, None
    for v in range(net.n):
        if v == n1 or v == n2:
            continue
        l1, l2 = net.link(n1, v), net.link(v, n2)
        if net.capacity[l1] - net.occupied[l1] <= 0 or net.capacity[l2] - net.occupied[l2] <= 0:
            continue
        key = min(scheme.classify(net.occupied[l1], net.capacity[l1]),
                  scheme.classify(net.occupied[l2], net.capacity[l2]))
        if key < best:
            best, best_v = key, v
    return best_v


class _ViaIndex:
    """Shared bookkeeping: for each link, the (pair, via) entries it feeds."""

    def __init__(self, net: Network):
        self.net = net
        n = net.n
        self.users: list[list[tuple[int, int]]] = [[] for _ in range(net.n_links)]
        for a, b in pairs_of(n):
            p = pair_index(a, b, n)
            for v in range(n):
                if v != a and v != b:
                    self.users[net.link(a, v)].append((p, v))
                    self.users[net.link(v, b)].append((p, v))
        self.pair_nodes = pairs_of(n)
        self.updates = 0     # index entries whose key changed
        self.touched = 0     # index entries examined
        self.link_events = 0


class LBAIndex(_ViaIndex):
    """Per pair, vias sorted by ``(-min idle, via)``."""

    def __init__(self, net: Network):
        super().__init__(net)
        self.key: dict[tuple[int, int], int] = {}
        self.sorted: list[list[tuple[int, int]]] = []
        for p, (a, b) in enumerate(self.pair_nodes):
            lst = []
            for v in range(net.n):
                if v != a and v != b:
                    k = self._value(a, b, v)
                    self.key[(p, v)] = k
                    lst.append((-k, v))
            lst.sort()
            self.sorted.append(lst)
        net.listeners.append(self.on_link_change)

    def _value(self, a, b, v):
        return min(self.net.idle(a, v), self.net.idle(v, b))

    def on_link_change(self, l: int) -> None:
        self.link_events += 1
        for p, v in self.users[l]:
            self.touched += 1
            a, b = self.pair_nodes[p]
            new = self._value(a, b, v)
            old = self.key[(p, v)]
            if new != old:
                lst = self.sorted[p]
                del lst[bisect.bisect_left(lst, (-old, v))]
                bisect.insort(lst, (-new, v))
                self.key[(p, v)] = new
                self.updates += 1

    def select(self, n1: int, n2: int) -> int | None:
        lst = self.sorted[pair_index(n1, n2, self.net.n)]
        if not lst or lst[0][0] >= 0:
            return None
        return lst[0][1]


class ALBAIndex(_ViaIndex):
    """Per pair, vias bucketed by path class; bucket ``K+1`` holds unusable vias.

    A link change only touches the index when the link's class or its
    full/not-full status changes.
    """

    def __init__(self, net: Network, scheme: LoadClassScheme):
        super().__init__(net)
        self.scheme = scheme
        self.status = [self._status(l) for l in range(net.n_links)]
        self.key: dict[tuple[int, int], int] = {}
        self.buckets: list[list[list[int]]] = []
        for p, (a, b) in enumerate(self.pair_nodes):
            bk = [[] for _ in range(scheme.k + 2)]
            for v in range(net.n):
                if v != a and v != b:
                    k = self._path_key(a, b, v)
                    self.key[(p, v)] = k
                    bk[k].append(v)
            self.buckets.append(bk)
        net.listeners.append(self.on_link_change)

    def _status(self, l):
        o, c = self.net.occupied[l], self.net.capacity[l]
        return (self.scheme.classify(o, c), o >= c)

    def _path_key(self, a, b, v):
        s1 = self.status[self.net.link(a, v)]
        s2 = self.status[self.net.link(v, b)]
        if s1[1] or s2[1]:
            return self.scheme.k + 1
        return min(s1[0], s2[0])

    def on_link_change(self, l: int) -> None:
        self.link_events += 1
        st = self._status(l)
        if st == self.status[l]:
            return
        self.status[l] = st
        for p, v in self.users[l]:
            self.touched += 1
            a, b = self.pair_nodes[p]
            new = self._path_key(a, b, v)
            old = self.key[(p, v)]
            if new != old:
                bk = self.buckets[p]
                bk[old].remove(v)
                bisect.insort(bk[new], v)
                self.key[(p, v)] = new
                self.updates += 1

    def select(self, n1: int, n2: int) -> int | None:
        bk = self.buckets[pair_index(n1, n2, self.net.n)]
        for c in range(1, self.scheme.k + 1):
            if bk[c]:
                return bk[c][0]
        return None


@dataclass(frozen=True)
class Call:
    n1: int
    n2: int
    links: tuple[int, ...]
    via: int | None
    release: float = math.inf
    serial: int = 0  # distinguishes otherwise identical calls

    @property
    def action(self):
        return DIRECT if self.via is None else self.via


class Router:
    """Places and releases calls under one policy and evaluator."""

    def __init__(self, net: Network, policy: str = "lba", evaluation: str = "lazy",
                 scheme: LoadClassScheme | None = None):
        if policy not in ("lba", "alba"):
            raise ValueError(f"unknown policy {policy!r}")
        if evaluation not in ("lazy", "anticipatory"):
            raise ValueError(f"unknown evaluation {evaluation!r}")
        if policy == "alba" and scheme is None:
            scheme = LoadClassScheme([0.8, 0.9])
        self.net, self.policy, self.evaluation, self.scheme = net, policy, evaluation, scheme
        self.index = None
        if evaluation == "anticipatory":
            self.index = LBAIndex(net) if policy == "lba" else ALBAIndex(net, scheme)
        self.active: set[Call] = set()
        self._serial = 0

    def select_via(self, n1: int, n2: int) -> int | None:
        if self.index is not None:
            return self.index.select(n1, n2)
        if self.policy == "lba":
            return lba_select_via(self.net, n1, n2)
        return alba_select_via(self.net, self.scheme, n1, n2)

    def place_call(self, n1: int, n2: int, release: float = math.inf) -> Call | None:
        if n1 == n2:
            raise ValueError("a call needs two distinct endpoints")
        net = self.net
        self._serial += 1
        if net.idle(n1, n2) > 0:
            call = Call(n1, n2, (net.link(n1, n2),), None, release, self._serial)
        else:
            v = self.select_via(n1, n2)
            if v is None:
                return None
            call = Call(n1, n2, (net.link(n1, v), net.link(v, n2)), v, release, self._serial)
        for l in call.links:
            net.change(l, +1)
        self.active.add(call)
        return call

    def release_call(self, call: Call) -> None:
        if call not in self.active:
            raise UnknownCall(f"call {call} is not active")
        self.active.remove(call)
        for l in call.links:
            self.net.change(l, -1)

    @property
    def index_updates(self) -> int:
        return self.index.updates if self.index is not None else 0


def place_call(router: Router, n1: int, n2: int) -> Call | None:
    return router.place_call(n1, n2)


def release_call(router: Router, call: Call) -> Network:
    router.release_call(call)
    return router.net


@dataclass(frozen=True)
class Traffic:
    rate: float          # call attempts per unit time, per node pair
    mean_hold: float     # mean holding time

    def __post_init__(self):
        if self.rate < 0 or not self.mean_hold > 0:
            raise ValueError("need rate >= 0 and mean_hold > 0")


def holding_time(seed: int, pair: int, k: int, traffic: Traffic) -> float:
    return event_stream(seed, pair, k).exponential(1.0 / traffic.mean_hold)


@dataclass
class NetworkResult:
    decisions: list[tuple[float, int, object]] = field(default_factory=list)
    offered: list[int] = field(default_factory=list)
    blocked: list[int] = field(default_factory=list)
    index_updates: int = 0
    index_touched: int = 0
    link_events: int = 0

    @property
    def total_offered(self) -> int:
        return sum(self.offered)

    @property
    def total_blocked(self) -> int:
        return sum(self.blocked)

    @property
    def blocking(self) -> float:
        return self.total_blocked / self.total_offered if self.total_offered else 0.0


def run_network(
    n: int,
    capacity: int | Sequence[int],
    traffic: Traffic,
    policy: str,
    evaluation: str,
    horizon: float,
    seed: int,
    scheme: LoadClassScheme | None = None,
    max_calls: int | None = None,
) -> NetworkResult:
    """Event-driven run with Poisson arrivals per pair and exponential holding.

    Arrivals of pair ``p`` come from ``PoissonClock(seed, p, rate)`` and the
    holding time of its ``k``-th call from ``event_stream(seed, p, k)``, the
    same draws the synchronous-relaxation workload uses.  A call releasing
    at time ``t`` frees its trunks before an arrival at ``t``.
    """
    import heapq

    net = Network(n, capacity)
    router = Router(net, policy, evaluation, scheme)
    pairs = pairs_of(n)
    clocks = [PoissonClock(seed, p, traffic.rate) for p in range(len(pairs))]
    arrivals = [(c.time, p) for p, c in enumerate(clocks) if c.time < horizon]
    heapq.heapify(arrivals)
    releases: list[tuple[float, int, Call]] = []
    tick = 0
    res = NetworkResult(offered=[0] * len(pairs), blocked=[0] * len(pairs))
    limit = max_calls if max_calls is not None else math.inf
    while arrivals and len(res.decisions) < limit:
        t, p = heapq.heappop(arrivals)
        while releases and releases[0][0] <= t:
            router.release_call(heapq.heappop(releases)[2])
        k = clocks[p].index
        a, b = pairs[p]
        hold = holding_time(seed, p, k, traffic)
        call = router.place_call(a, b, t + hold)
        res.offered[p] += 1
        if call is None:
            res.blocked[p] += 1
            res.decisions.append((t, p, BLOCKED))
        else:
            tick += 1
            heapq.heappush(releases, (call.release, tick, call))
            res.decisions.append((t, p, call.action))
        nt = clocks[p].advance()
        if nt < horizon:
            heapq.heappush(arrivals, (nt, p))
    if router.index is not None:
        res.index_updates = router.index.updates
        res.index_touched = router.index.touched
        res.link_events = router.index.link_events
    return res


class CircuitModel:
    """Node pairs as components for the parallel engines.

    The state of pair ``p`` is the tuple of calls it originated that are
    still held, each as ``(release_time, links)``.  Link occupancy at time
    ``t`` is derived by counting every pair's calls with release after
    ``t``, so each update reads all other pairs.  Decisions use the lazy
    evaluator of ``policy``.
    """

    def __init__(self, n: int, capacity: int, traffic: Traffic, policy: str = "lba",
                 seed: int = 0, scheme: LoadClassScheme | None = None):
        self.n = n
        self.capacity = capacity
        self.traffic = traffic
        self.policy = policy
        self.scheme = scheme if scheme is not None else LoadClassScheme([0.8, 0.9])
        self.seed = seed
        self.pairs = pairs_of(n)
        self.n_components = len(self.pairs)
        self._others = [tuple(j for j in range(self.n_components) if j != i)
                        for i in range(self.n_components)]

    def neighbors(self, i):
        return self._others[i]

    def rate(self, i):
        return self.traffic.rate

    def initial_state(self, i):
        return ()

    def update(self, i, t, k, state, read, rng):
        hold = rng.exponential(1.0 / self.traffic.mean_hold)
        net = Network(self.n, self.capacity)
        occ = net.occupied
        own = tuple(c for c in state if c[0] > t)
        for c in own:
            for l in c[1]:
                occ[l] += 1
        for j in self._others[i]:
            for rel, links in read(j):
                if rel > t:
                    for l in links:
                        occ[l] += 1
        a, b = self.pairs[i]
        if net.idle(a, b) > 0:
            links, action = (net.link(a, b),), DIRECT
        else:
            v = (lba_select_via(net, a, b) if self.policy == "lba"
                 else alba_select_via(net, self.scheme, a, b))
            if v is None:
                return own, BLOCKED
            links, action = (net.link(a, v), net.link(v, b)), v
        return own + ((t + hold, links),), action
