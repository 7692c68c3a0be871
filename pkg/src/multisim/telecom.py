"""Two-provider telephone market.

Customer ``i`` calls ``j`` for ``v_ij`` minutes a month.  Each provider
charges an in-network and an out-of-network price per minute, and a customer
is pulled toward the other provider at rate ``alpha * (B_current - B_other)``
when the other bill is strictly lower.  After a switch the customer is
satisfied until the subscriptions of the people they call change.

Volumes are integer minutes, so the per-provider volume sums kept for each
customer are exact and bills are reproducible.
"""

from __future__ import annotations

import csv
import math
from array import array
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .core.counters import MaintainedCounter
from .core.rng import RandomStream
from .dispenser import PoissonDispenser


@dataclass(frozen=True)
class Plan:
    p_same: float
    p_other: float

    def __post_init__(self):
        if self.p_same < 0 or self.p_other < 0:
            raise ValueError("prices must be nonnegative")

    @classmethod
    def flat(cls, price: float) -> "Plan":
        return cls(price, price)

    @property
    def kind(self) -> str:
        return "flat" if self.p_same == self.p_other else "friends-and-family"


DEFAULT_PLANS = (Plan(0.10, 0.25), Plan.flat(0.18))


class Market:
    """Customers, subscriptions, calling volumes and maintained bills.

    ``vol_on[i][k]`` holds the minutes ``i`` calls to subscribers of
    provider ``k+1``.  Pull rates are cached in ``rates`` and refreshed by
    :meth:`switch` for the customers whose bills can change.
    """

    def __init__(
        self,
        subscriptions: Sequence[int],
        volumes: dict[int, dict[int, int]] | Sequence[dict[int, int]],
        plans: Sequence[Plan] = DEFAULT_PLANS,
        alpha: float = 0.1,
    ):
        if alpha < 0:
            raise ValueError("alpha must be nonnegative")
        self.n = len(subscriptions)
        self.s = [int(x) for x in subscriptions]
        if any(x not in (1, 2) for x in self.s):
            raise ValueError("subscriptions must be 1 or 2")
        if len(plans) != 2:
            raise ValueError("exactly two providers are modelled")
        self.plans = tuple(plans)
        self.alpha = float(alpha)
        self.out: list[dict[int, int]] = [dict() for _ in range(self.n)]
        items = volumes.items() if isinstance(volumes, dict) else enumerate(volumes)
        for i, row in items:
            for j, v in row.items():
                if i == j:
                    raise ValueError("a customer cannot call themselves")
                if v < 0 or int(v) != v:
                    raise ValueError("volumes must be nonnegative integer minutes")
                if v:
                    self.out[i][j] = int(v)
        self.callers: list[list[int]] = [[] for _ in range(self.n)]
        for i in range(self.n):
            for j in self.out[i]:
                self.callers[j].append(i)
        self.vol_on = [[0, 0] for _ in range(self.n)]
        for i in range(self.n):
            for j, v in self.out[i].items():
                self.vol_on[i][self.s[j] - 1] += v
        self.rates = [self._rate(i) for i in range(self.n)]
        self.unsatisfied = MaintainedCounter("unsatisfied", sum(1 for r in self.rates if r > 0))
        self.unsatisfied.on("became-unsatisfied", 1)
        self.unsatisfied.on("became-satisfied", -1)
        self.switches = 0

    # bills -------------------------------------------------------------
    def bill(self, i: int, k: int) -> float:
        on_k = self.vol_on[i][k - 1]
        off_k = self.vol_on[i][2 - k]
        p = self.plans[k - 1]
        return p.p_same * on_k + p.p_other * off_k

    def bill_fresh(self, i: int, k: int) -> float:
        """Bill recomputed from the volume lists (oracle for :meth:`bill`)."""
        on_k = sum(v for j, v in self.out[i].items() if self.s[j] == k)
        off_k = sum(v for j, v in self.out[i].items() if self.s[j] != k)
        p = self.plans[k - 1]
        return p.p_same * on_k + p.p_other * off_k

    def _rate(self, i: int) -> float:
        cur = self.s[i]
        gap = self.bill(i, cur) - self.bill(i, 3 - cur)
        return self.alpha * gap if gap > 0 else 0.0

    def pull_rate(self, i: int) -> float:
        return self.rates[i]

    def refresh_set(self, i: int) -> list[int]:
        # only callers' bills mention i; callees are unaffected by i's provider
        return sorted({i, *self.callers[i]})

    def switch(self, i: int) -> list[int]:
        """Flip customer ``i`` to the other provider; return customers whose rate changed."""
        old = self.s[i]
        new = 3 - old
        self.s[i] = new
        for c in self.callers[i]:
            v = self.out[c][i]
            self.vol_on[c][old - 1] -= v
            self.vol_on[c][new - 1] += v
        changed = []
        for j in self.refresh_set(i):
            r = self._rate(j)
            old_r = self.rates[j]
            if r != old_r:
                self.rates[j] = r
                changed.append(j)
                if (old_r > 0) != (r > 0):
                    self.unsatisfied.notify("became-unsatisfied" if r > 0 else "became-satisfied")
        self.switches += 1
        return changed

    def lazy_scan(self) -> int:
        """Unsatisfied customers counted from fresh bills."""
        return sum(1 for i in range(self.n) if self.bill_fresh(i, 3 - self.s[i]) < self.bill_fresh(i, self.s[i]))

    def shares(self) -> tuple[int, int]:
        n1 = sum(1 for x in self.s if x == 1)
        return n1, self.n - n1


def bill(i: int, k: int, market: Market) -> float:
    return market.bill(i, k)


def pull_rate(i: int, market: Market) -> float:
    return market.pull_rate(i)


def switch_customer(market: Market, i: int) -> Market:
    if not market.rates[i] > 0:
        raise ValueError(f"customer {i} is satisfied and has no reason to switch")
    market.switch(i)
    return market


def random_market(
    n: int,
    degree: float,
    seed: int,
    plans: Sequence[Plan] = DEFAULT_PLANS,
    alpha: float = 0.1,
    share1: float = 0.5,
    max_minutes: int = 100,
) -> Market:
    """Random sparse market: each customer calls about ``degree`` others."""
    st = RandomStream(seed, "market")
    subs = [1 if st.uniform() < share1 else 2 for _ in range(n)]
    vols: list[dict[int, int]] = [dict() for _ in range(n)]
    if n > 1:
        for i in range(n):
            k = min(n - 1, int(degree) + (1 if st.uniform() < degree - int(degree) else 0))
            while len(vols[i]) < k:
                j = st.randbelow(n)
                if j != i:
                    vols[i][j] = 1 + st.randbelow(max_minutes)
    return Market(subs, vols, plans, alpha)


def read_edges(path) -> list[tuple[int, int, int]]:
    """``caller,callee,minutes`` rows from a CSV file (a header line is allowed)."""
    edges = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                i, j, v = (int(x) for x in row[:3])
            except ValueError:
                if not edges:
                    continue  # header
                raise ValueError(f"bad edge row {row!r} in {path}") from None
            edges.append((i, j, v))
    return edges


def market_from_edges(
    n: int,
    edges: Iterable[tuple[int, int, int]],
    seed: int,
    plans: Sequence[Plan] = DEFAULT_PLANS,
    alpha: float = 0.1,
    share1: float = 0.5,
) -> Market:
    """Market on a given calling graph with seeded initial subscriptions."""
    vols: list[dict[int, int]] = [dict() for _ in range(n)]
    for i, j, v in edges:
        if not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"edge ({i}, {j}) outside 0..{n - 1}")
        vols[i][j] = vols[i].get(j, 0) + v
    st = RandomStream(seed, "market")
    subs = [1 if st.uniform() < share1 else 2 for _ in range(n)]
    return Market(subs, vols, plans, alpha)


@dataclass
class TelecomResult:
    times: array = field(default_factory=lambda: array("d"))
    customers: array = field(default_factory=lambda: array("l"))
    new_provider: array = field(default_factory=lambda: array("b"))
    share_series: list[tuple[float, int, int]] = field(default_factory=list)
    counter_checks: list[tuple[float, int, int]] = field(default_factory=list)
    status: str = "horizon"
    t_end: float = 0.0
    steps: int = 0
    final_shares: tuple[int, int] = (0, 0)

    @property
    def events(self) -> list[tuple[float, int, int]]:
        return list(zip(self.times, self.customers, self.new_provider))


def _report(res: TelecomResult, market: Market, t: float, check: bool) -> None:
    n1, n2 = market.shares()
    res.share_series.append((t, n1, n2))
    if check:
        res.counter_checks.append((t, market.unsatisfied.value, market.lazy_scan()))


def run_event_driven(
    market: Market,
    horizon: float,
    stream: RandomStream,
    delegation: str = "tree",
    report_dt: float | None = None,
    check_counter: bool = False,
    max_events: int | None = None,
) -> TelecomResult:
    """Dispenser-driven switching until ``horizon`` or quiescence (all satisfied)."""
    disp = PoissonDispenser(market.rates, delegation)
    res = TelecomResult()
    t = 0.0
    next_report = 0.0 if report_dt else math.inf
    limit = max_events if max_events is not None else math.inf
    while True:
        arrival = disp.next_arrival(t, stream)
        t_next = arrival[0] if arrival else math.inf
        while next_report <= min(t_next, horizon):
            _report(res, market, next_report, check_counter)
            next_report += report_dt
        if arrival is None:
            res.status = "quiescent"
            break
        if t_next >= horizon:
            break
        if len(res.times) >= limit:
            res.status = "max-events"
            break
        t, i = arrival
        for j in market.switch(i):
            disp.set_rate(j, market.rates[j])
        res.times.append(t)
        res.customers.append(i)
        res.new_provider.append(market.s[i])
    res.t_end = t if res.status == "max-events" else horizon
    res.final_shares = market.shares()
    return res


def run_time_driven(
    market: Market,
    dt: float,
    horizon: float,
    stream: RandomStream,
    report_dt: float | None = None,
) -> TelecomResult:
    """Fixed-step baseline: in each step every unsatisfied customer switches
    with probability ``r_i * dt``; rates are recomputed after the step."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    n_steps = math.ceil(horizon / dt - 1e-12)
    res = TelecomResult()
    rates = np.array(market.rates, dtype=float)
    next_report = 0.0 if report_dt else math.inf
    for step in range(n_steps):
        t = step * dt
        while next_report <= t:
            _report(res, market, next_report, False)
            next_report += report_dt
        if not rates.any():
            res.status = "quiescent"  # every customer satisfied: nothing can change
            break
        h = min(dt, horizon - t)
        p = rates * h
        if p.max(initial=0.0) >= 1.0:
            raise ValueError(f"r_i*dt reaches {p.max():.3g}; reduce dt below 1/max(r_i)")
        q = stream.uniform_array(market.n)
        movers = np.flatnonzero(q < p)
        t_end = t + h
        for i in movers.tolist():
            market.switch(i)  # decided at step start, applied together
            res.times.append(t_end)
            res.customers.append(i)
            res.new_provider.append(market.s[i])
        if len(movers):
            touched = {j for i in movers.tolist() for j in market.refresh_set(i)}
            for j in touched:
                rates[j] = market.rates[j]
        res.steps += 1
    while next_report <= horizon:
        _report(res, market, next_report, False)
        next_report += report_dt
    res.t_end = horizon
    res.final_shares = market.shares()
    return res
