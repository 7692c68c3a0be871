"""Kinetic Ising model on an ``n x n`` periodic square lattice.

Spin flips are driven by the Poisson dispenser.  A site's flip rate depends
only on its own spin and the sum of its four neighbours, so at most ten
distinct rates occur; the class variant exploits this for constant-time
delegation.  A uniformized random-sequential-update variant is included.
"""

from __future__ import annotations

import math
from array import array
from dataclasses import dataclass, field

import numpy as np

from .core.rng import RandomStream
from .dispenser import RateClassTable, RateTree, UniformizedSampler

NEIGHBOR_SUMS = (-4, -2, 0, 2, 4)


@dataclass(frozen=True)
class IsingParams:
    temperature: float
    field: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")
        if not self.scale > 0:
            raise ValueError("rate scale must be positive")


def flip_rate(s: int, k: int, params: IsingParams) -> float:
    """Metropolis rate ``scale * exp(-max(dE, 0) / T)`` with ``dE = 2 s (k + h)``."""
    if not params.temperature > 0:
        raise ValueError("temperature must be positive")
    de = 2.0 * s * (k + params.field)
    return params.scale * math.exp(-max(de, 0.0) / params.temperature)


def class_index(s: int, k: int) -> int:
    return (5 if s > 0 else 0) + (k + 4) // 2


def rate_table(params: IsingParams) -> list[float]:
    """Rates of the ten ``(s, k)`` classes in :func:`class_index` order."""
    table = [0.0] * 10
    for s in (-1, 1):
        for k in NEIGHBOR_SUMS:
            table[class_index(s, k)] = flip_rate(s, k, params)
    return table


class SpinLattice:
    """Spins ``+1/-1`` on a periodic square lattice; site ``r*n + c``."""

    def __init__(self, n: int, spins=None):
        if n < 1:
            raise ValueError("lattice side must be positive")
        self.n = n
        self.size = n * n
        if spins is None:
            spins = [1] * self.size
        spins = [int(s) for s in np.asarray(spins).ravel()]
        if len(spins) != self.size or any(s not in (-1, 1) for s in spins):
            raise ValueError("spins must be n*n values in {+1, -1}")
        self.spins = spins
        self.nbrs = [self._neighbors(i) for i in range(self.size)]

    def _neighbors(self, i: int) -> tuple[int, int, int, int]:
        n = self.n
        r, c = divmod(i, n)
        return (((r - 1) % n) * n + c, r * n + (c + 1) % n,
                ((r + 1) % n) * n + c, r * n + (c - 1) % n)

    @classmethod
    def random(cls, n: int, stream: RandomStream) -> "SpinLattice":
        return cls(n, [1 if stream.uniform() < 0.5 else -1 for _ in range(n * n)])

    def neighbor_sum(self, i: int) -> int:
        s = self.spins
        a, b, c, d = self.nbrs[i]
        return s[a] + s[b] + s[c] + s[d]

    def class_of(self, i: int) -> int:
        return class_index(self.spins[i], self.neighbor_sum(i))

    def magnetization(self) -> int:
        return sum(self.spins)

    def state_code(self) -> int:
        """Bit ``i`` set when spin ``i`` is up."""
        return sum(1 << i for i, s in enumerate(self.spins) if s > 0)

    def refresh_set(self, i: int) -> list[int]:
        return sorted({i, *self.nbrs[i]})

    def grid(self) -> np.ndarray:
        return np.array(self.spins, dtype=np.int8).reshape(self.n, self.n)


@dataclass
class IsingResult:
    times: array = field(default_factory=lambda: array("d"))
    sites: array = field(default_factory=lambda: array("l"))
    magnetization: array = field(default_factory=lambda: array("l"))
    initial_magnetization: int = 0
    initial_code: int = 0
    t_end: float = 0.0
    visits: int = 0
    status: str = "horizon"

    @property
    def flips(self) -> int:
        return len(self.sites)

    @property
    def visits_per_event(self) -> float:
        return self.visits / self.flips if self.flips else 0.0


def run_dispenser_kmc(
    lattice: SpinLattice,
    params: IsingParams,
    horizon: float,
    stream: RandomStream,
    variant: str = "tree",
    max_flips: int | None = None,
) -> IsingResult:
    """Rejection-free continuous-time dynamics up to ``horizon``.

    The ``tree`` variant delegates through a sum tree (one draw, log N
    visits); ``class`` through the ten-class table (two draws, at most ten
    class visits).  Both sample the interarrival first.  ``lattice`` is
    modified in place.
    """
    table = rate_table(params)
    spins, nbrs = lattice.spins, lattice.nbrs
    res = IsingResult(initial_magnetization=lattice.magnetization(), initial_code=lattice.state_code())
    classes = [lattice.class_of(i) for i in range(lattice.size)]
    if variant == "tree":
        tree = RateTree([table[c] for c in classes])
        total = lambda: tree.node[1]
    elif variant == "class":
        tab = RateClassTable(table, classes)
        total = tab.total
    else:
        raise ValueError(f"unknown variant {variant!r}")
    refresh = [lattice.refresh_set(i) for i in range(lattice.size)]
    t = 0.0
    m = lattice.magnetization()
    limit = max_flips if max_flips is not None else math.inf
    while True:
        r = total()
        if not r > 0:
            res.status = "quiescent"
            break
        t += -math.log(stream.uniform()) / r
        if t >= horizon:
            break
        if res.flips >= limit:
            res.status = "max-flips"
            break
        if variant == "tree":
            i = tree.select(stream.uniform())
            res.visits += tree.last_visits
        else:
            i = tab.select(stream.uniform(), stream.uniform())
            res.visits += tab.last_visits
        spins[i] = -spins[i]
        m += 2 * spins[i]
        for j in refresh[i]:
            a, b, c, d = nbrs[j]
            cj = class_index(spins[j], spins[a] + spins[b] + spins[c] + spins[d])
            if cj != classes[j]:
                classes[j] = cj
                if variant == "tree":
                    tree.update(j, table[cj])
                else:
                    tab.move(j, cj)
        res.times.append(t)
        res.sites.append(i)
        res.magnetization.append(m)
    res.t_end = min(t, horizon)
    return res


@dataclass
class UniformizedResult:
    updates: int
    accepted: int
    sites: array
    mean_rate_ratio: float
    magnetization: int

    @property
    def acceptance(self) -> float:
        return self.accepted / self.updates if self.updates else 0.0


def run_uniformized(lattice: SpinLattice, params: IsingParams, update_count: int, stream: RandomStream) -> UniformizedResult:
    """Random sequential update with acceptance ``r_i / r_*``.

    ``r_*`` is the largest class rate.  ``mean_rate_ratio`` averages
    ``<r_i> / r_*`` over the states in which updates were attempted.
    """
    table = rate_table(params)
    r_star = max(table)
    spins, nbrs = lattice.spins, lattice.nbrs
    sampler = UniformizedSampler([table[lattice.class_of(i)] for i in range(lattice.size)], r_star)
    rates = sampler.rates
    refresh = [lattice.refresh_set(i) for i in range(lattice.size)]
    rate_sum = math.fsum(rates)
    ratio_acc = 0.0
    sites = array("l")
    for _ in range(update_count):
        ratio_acc += rate_sum
        i, ok = sampler.step(stream)
        if not ok:
            continue
        spins[i] = -spins[i]
        sites.append(i)
        for j in refresh[i]:
            a, b, c, d = nbrs[j]
            new = table[class_index(spins[j], spins[a] + spins[b] + spins[c] + spins[d])]
            rate_sum += new - rates[j]
            rates[j] = new
    n = lattice.size
    mean_ratio = ratio_acc / (update_count * n * r_star) if update_count else 0.0
    return UniformizedResult(update_count, len(sites), sites, mean_ratio, lattice.magnetization())


def occupation(result: IsingResult, n_sites: int, horizon: float) -> np.ndarray:
    """Time spent in each of the ``2**n_sites`` configurations (small lattices)."""
    sites = np.frombuffer(result.sites, dtype=np.int64) if result.sites.itemsize == 8 else np.array(result.sites)
    times = np.array(result.times)
    codes = np.empty(len(sites) + 1, dtype=np.int64)
    codes[0] = result.initial_code
    if len(sites):
        codes[1:] = result.initial_code ^ np.bitwise_xor.accumulate(np.left_shift(1, sites))
    bounds = np.concatenate(([0.0], times, [horizon]))
    return np.bincount(codes, weights=np.diff(bounds), minlength=1 << n_sites)
