"""Poisson dispenser: sample the aggregate arrival stream of rate ``R = sum(r_i)``
and delegate each arrival to component ``i`` with probability ``r_i / R``.

Three delegation mechanisms are provided: a linear prefix scan (the
reference), a binary sum tree (logarithmic) and a rate-class table
(constant time when the set of distinct rates is small).  A uniformized
sampler turns heterogeneous rates into uniform random sequential update
with an acceptance coin.
"""

from __future__ import annotations

import math
from typing import Sequence

from .core.events import SimulationError
from .core.rng import RandomStream

REBUILD_EVERY = 1 << 20


class NoActiveComponents(SimulationError):
    """All component rates are zero; there is nothing to delegate to."""


def _check_rate(rate: float) -> None:
    if not rate >= 0 or math.isinf(rate):
        raise ValueError(f"rate must be a finite nonnegative number, got {rate!r}")


class RateTree:
    """Array-backed binary sum tree over per-component rates.

    Node 1 is the root; node ``k`` has children ``2k`` and ``2k+1``; leaves
    occupy ``[size, 2*size)`` where ``size`` is ``n`` rounded up to a power
    of two.  Padding leaves hold rate zero.
    """

    def __init__(self, rates: Sequence[float] | int):
        if isinstance(rates, int):
            rates = [0.0] * rates
        self.n = len(rates)
        if self.n == 0:
            raise ValueError("a rate tree needs at least one leaf")
        self.size = 1 << (self.n - 1).bit_length()
        self.depth = self.size.bit_length() - 1  # = ceil(log2 n)
        self.node = [0.0] * (2 * self.size)
        for i, r in enumerate(rates):
            _check_rate(r)
            self.node[self.size + i] = float(r)
        self._rebuild_internal()
        self.updates_since_rebuild = 0
        # instrumentation
        self.last_writes = 0
        self.last_visits = 0
        self.total_visits = 0

    def _rebuild_internal(self):
        node = self.node
        for k in range(self.size - 1, 0, -1):
            node[k] = node[2 * k] + node[2 * k + 1]

    def rebuild(self) -> None:
        self._rebuild_internal()
        self.updates_since_rebuild = 0

    @property
    def total(self) -> float:
        return self.node[1]

    def rate(self, i: int) -> float:
        return self.node[self.size + i]

    def rates(self) -> list[float]:
        return self.node[self.size:self.size + self.n]

    def update(self, i: int, new_rate: float) -> None:
        """Set leaf ``i`` and refresh its ancestors: ``depth + 1`` writes."""
        if not 0 <= i < self.n:
            raise IndexError(f"component {i} out of range 0..{self.n - 1}")
        if not 0.0 <= new_rate < math.inf:
            _check_rate(new_rate)
        node = self.node
        k = self.size + i
        node[k] = float(new_rate)
        writes = 1
        k >>= 1
        while k:
            node[k] = node[2 * k] + node[2 * k + 1]
            writes += 1
            k >>= 1
        self.last_writes = writes
        self.updates_since_rebuild += 1
        if self.updates_since_rebuild >= REBUILD_EVERY:
            self.rebuild()

    def select(self, q: float) -> int:
        """Descend from the root with ``theta = R*q``; ``depth`` node visits."""
        node = self.node
        total = node[1]
        if not total > 0:
            raise NoActiveComponents("aggregate rate is zero")
        theta = total * q
        k = 1
        size = self.size
        visits = 0
        while k < size:
            visits += 1
            left = node[2 * k]
            if theta < left or not node[2 * k + 1] > 0:
                # the second test only fires when rounding pushes theta past
                # the last positive leaf
                k = 2 * k
            else:
                theta -= left
                k = 2 * k + 1
        self.last_visits = visits
        self.total_visits += visits
        return k - size

    def check_consistency(self, rel_tol: float = 1e-9) -> bool:
        node = self.node
        for k in range(1, self.size):
            s = node[2 * k] + node[2 * k + 1]
            if abs(node[k] - s) > rel_tol * max(abs(s), 1e-300):
                return False
        return True


def tree_update(tree: RateTree, i: int, new_rate: float) -> RateTree:
    tree.update(i, new_rate)
    return tree


def tree_select(tree: RateTree, q: float) -> int:
    return tree.select(q)


def linear_scan_select(rates: Sequence[float], q: float, total: float | None = None) -> int:
    """Find ``i`` with ``V[i-1] <= R*q < V[i]`` by scanning prefix sums.

    ``total`` overrides ``R`` (used when the aggregate rate is tracked
    elsewhere); otherwise ``R`` is the plain sum of ``rates``.
    """
    if total is None:
        total = sum(rates)
    if not total > 0:
        raise NoActiveComponents("aggregate rate is zero")
    target = total * q
    acc = 0.0
    last_positive = -1
    for i, r in enumerate(rates):
        if r > 0:
            last_positive = i
        acc += r
        if target < acc:
            return i
    return last_positive


class RateClassTable:
    """Components grouped by a shared rate.

    Each class holds a rate and a member list; ``where[i]`` is the
    ``(class, slot)`` of component ``i``.  Moves are O(1) via
    swap-with-last removal.
    """

    def __init__(self, class_rates: Sequence[float], membership: Sequence[int] = ()):
        for r in class_rates:
            _check_rate(r)
        self.rates = [float(r) for r in class_rates]
        self.members: list[list[int]] = [[] for _ in class_rates]
        self.where: dict[int, tuple[int, int]] = {}
        self.last_visits = 0
        self.total_visits = 0
        for i, c in enumerate(membership):
            self.add(i, c)

    @property
    def n_classes(self) -> int:
        return len(self.rates)

    def _check_class(self, c: int) -> None:
        if not 0 <= c < len(self.rates):
            raise KeyError(f"unknown rate class {c}")

    def add(self, i: int, c: int) -> None:
        self._check_class(c)
        if i in self.where:
            raise ValueError(f"component {i} already in class {self.where[i][0]}")
        self.members[c].append(i)
        self.where[i] = (c, len(self.members[c]) - 1)

    def class_of(self, i: int) -> int:
        return self.where[i][0]

    def move(self, i: int, new_class: int) -> None:
        self._check_class(new_class)
        old, slot = self.where[i]
        if old == new_class:
            return
        lst = self.members[old]
        last = lst.pop()
        if last != i:
            lst[slot] = last
            self.where[last] = (old, slot)
        self.members[new_class].append(i)
        self.where[i] = (new_class, len(self.members[new_class]) - 1)

    def total(self) -> float:
        return sum(r * len(m) for r, m in zip(self.rates, self.members))

    def select(self, q1: float, q2: float) -> int:
        total = self.total()
        if not total > 0:
            raise NoActiveComponents("no class carries a positive rate")
        target = total * q1
        acc = 0.0
        chosen = -1
        visits = 0
        for c, (r, m) in enumerate(zip(self.rates, self.members)):
            visits += 1
            w = r * len(m)
            if w > 0:
                chosen = c
                acc += w
                if target < acc:
                    break
        self.last_visits = visits
        self.total_visits += visits
        members = self.members[chosen]
        n = len(members)
        return members[min(int(q2 * n), n - 1)]


def class_select(table: RateClassTable, q1: float, q2: float) -> int:
    return table.select(q1, q2)


def class_move(table: RateClassTable, i: int, new_class: int) -> RateClassTable:
    table.move(i, new_class)
    return table


class UniformizedSampler:
    """Uniform component choice plus an acceptance coin ``r_i / r_star``."""

    def __init__(self, rates: Sequence[float], r_star: float):
        if not r_star > 0:
            raise ValueError("r_star must be positive")
        self.rates = list(rates)
        self.r_star = float(r_star)
        self.n = len(self.rates)
        for i, r in enumerate(self.rates):
            self._check(i, r)

    def _check(self, i, r):
        _check_rate(r)
        if r > self.r_star:
            raise SimulationError(f"rate {r} of component {i} exceeds bound r_star={self.r_star}")

    def set_rate(self, i: int, r: float) -> None:
        self._check(i, r)
        self.rates[i] = r

    def step(self, stream: RandomStream) -> tuple[int, bool]:
        i = min(int(stream.uniform() * self.n), self.n - 1)
        r = self.rates[i]
        if r > self.r_star:
            raise SimulationError(f"rate {r} of component {i} exceeds bound r_star={self.r_star}")
        return i, stream.uniform() * self.r_star < r


def uniformized_step(s: UniformizedSampler, stream: RandomStream) -> tuple[int, bool]:
    return s.step(stream)


class PoissonDispenser:
    """Aggregate-stream sampler over a :class:`RateTree`.

    ``delegation`` picks how an arrival is handed to a component: ``"tree"``
    descends the sum tree, ``"scan"`` runs the linear prefix scan against
    the same aggregate rate.  Both consume identical draws, so with the same
    stream they produce identical event sequences.
    """

    def __init__(self, rates: Sequence[float], delegation: str = "tree"):
        if delegation not in ("tree", "scan"):
            raise ValueError(f"unknown delegation {delegation!r}")
        self.tree = RateTree(rates)
        self.delegation = delegation

    @property
    def total(self) -> float:
        return self.tree.total

    def set_rate(self, i: int, rate: float) -> None:
        self.tree.update(i, rate)

    def next_arrival(self, t: float, stream: RandomStream) -> tuple[float, int] | None:
        """Return ``(t_next, i)`` or ``None`` when the aggregate rate is zero."""
        total = self.tree.total
        if not total > 0:
            return None
        dt = -math.log(stream.uniform()) / total
        q = stream.uniform()
        if self.delegation == "tree":
            i = self.tree.select(q)
        else:
            i = linear_scan_select(self.tree.rates(), q, total=total)
        return t + dt, i
