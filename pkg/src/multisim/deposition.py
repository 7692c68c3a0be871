"""Ballistic deposition of unit disks on a periodic one-dimensional substrate.

A particle falls vertically at abscissa ``x`` and stops at first contact,
either with the substrate (centre height 1/2) or with an earlier disk.  The
substrate is cut into sectors of width at least one diameter, so a landing
only needs the particles of its own sector and the two adjacent ones.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core.rng import PoissonClock, RandomStream
from . import parallel


@dataclass(frozen=True)
class Particle:
    m: int
    x: float
    z: float


def wrap_distance(a: float, b: float, length: float) -> float:
    d = abs(a - b)
    return min(d, length - d)


class Sector:
    """Particles of one sector kept in decreasing height order."""

    __slots__ = ("neg_z", "particles")

    def __init__(self):
        self.neg_z: list[float] = []
        self.particles: list[Particle] = []

    def add(self, p: Particle) -> None:
        pos = bisect.bisect_right(self.neg_z, -p.z)
        self.neg_z.insert(pos, -p.z)
        self.particles.insert(pos, p)

    def __len__(self):
        return len(self.particles)

    def __iter__(self):
        return iter(self.particles)


def _contact_height(x: float, length: float, candidates: Iterable[Particle], best: float, sorted_desc: bool) -> float:
    for p in candidates:
        if sorted_desc and p.z + 1.0 <= best:
            break  # nothing lower can reach above best
        d = wrap_distance(x, p.x, length)
        if d < 1.0:
            z = p.z + math.sqrt(1.0 - d * d)
            if z > best:
                best = z
    return best


def landing_height_scan(particles: Iterable[Particle], x: float, length: float) -> float:
    """Exhaustive-scan landing height over every deposited particle."""
    return _contact_height(x, length, particles, 0.5, sorted_desc=False)


def landing_over(sectors: Iterable[Sector], x: float, length: float) -> float:
    best = 0.5
    for s in sectors:
        best = _contact_height(x, length, s.particles, best, sorted_desc=True)
    return best


class Substrate:
    """Periodic substrate ``[0, length)`` split into ``n_sectors`` equal sectors."""

    def __init__(self, length: float, n_sectors: int = 1):
        if not length > 0:
            raise ValueError("substrate length must be positive")
        if n_sectors < 1:
            raise ValueError("need at least one sector")
        width = length / n_sectors
        if width < 1.0:
            raise ValueError(f"sector width {width} is below one particle diameter")
        self.length = float(length)
        self.n_sectors = n_sectors
        self.width = width
        self.sectors = [Sector() for _ in range(n_sectors)]
        self.particles: list[Particle] = []
        self.last_scanned = 0

    def sector_of(self, x: float) -> int:
        return min(int(x / self.width), self.n_sectors - 1)

    def nearby(self, s: int) -> list[int]:
        n = self.n_sectors
        return sorted({(s - 1) % n, s, (s + 1) % n})

    def landing_height(self, x: float) -> float:
        if not 0 <= x < self.length:
            raise ValueError(f"abscissa {x} outside [0, {self.length})")
        near = [self.sectors[j] for j in self.nearby(self.sector_of(x))]
        self.last_scanned = sum(len(s) for s in near)
        return landing_over(near, x, self.length)

    def deposit(self, x: float) -> Particle:
        p = Particle(len(self.particles), x, self.landing_height(x))
        self.sectors[self.sector_of(x)].add(p)
        self.particles.append(p)
        return p


def landing_height(sub: Substrate, x: float) -> float:
    return sub.landing_height(x)


def deposit_sequential(length: float, m: int, stream: RandomStream, n_sectors: int | None = None) -> list[Particle]:
    """Deposit ``m`` particles at uniformly random abscissae."""
    if m < 0:
        raise ValueError("particle count must be nonnegative")
    sub = Substrate(length, n_sectors if n_sectors is not None else max(1, int(length)))
    for _ in range(m):
        sub.deposit(stream.uniform() * length)
    return sub.particles


def deposit_continuous(length: float, horizon: float, seed: int, rate: float = 1.0) -> list[tuple[float, Particle]]:
    """Sequential continuous-time scheme: one Poisson clock of rate ``rate*length``."""
    sub = Substrate(length, max(1, int(length)))
    clock = PoissonClock(seed, "deposition", rate * length)
    stream = RandomStream(seed, "deposition-x")
    out = []
    while clock.time < horizon:
        out.append((clock.time, sub.deposit(stream.uniform() * length)))
        clock.advance()
    return out


class DepositionModel:
    """Sector ring as a component graph for the parallel engines.

    Component ``i`` is sector ``[i*w, (i+1)*w)`` with a Poisson clock of rate
    ``rate`` (per sector).  An arrival drops one particle uniformly inside
    the sector; the update reads the two adjacent sectors.  States are
    mutable :class:`Sector` objects, so this model runs under the sequential,
    lockstep and cautious engines but not under synchronous relaxation.
    """

    def __init__(self, length: float, n_sectors: int, seed: int = 0, rate: float = 1.0):
        self.sub = Substrate(length, n_sectors)  # validates the sector width
        self.length = float(length)
        self.n_components = n_sectors
        self.width = self.sub.width
        self.seed = seed
        self._rate = rate

    def neighbors(self, i):
        n = self.n_components
        return tuple(j for j in sorted({(i - 1) % n, (i + 1) % n}) if j != i)

    def rate(self, i):
        return self._rate

    def initial_state(self, i):
        return Sector()

    def update(self, i, t, k, state, read, rng):
        x = (i + rng.uniform()) * self.width
        if x >= self.length:
            x = math.nextafter(self.length, 0.0)
        near = [state] + [read(j) for j in self.neighbors(i)]
        z = landing_over(near, x, self.length)
        state.add(Particle(k, x, z))
        return state, (x, z)


def deposit_parallel_cautious(
    length: float,
    n_sectors: int,
    horizon: float,
    seed: int = 0,
    workers: int = 1,
    engine: str = "cautious",
) -> parallel.RunResult:
    """Deposit on ``n_sectors`` sector components up to ``horizon``.

    ``engine`` is ``cautious`` (threaded), ``lockstep`` (single-threaded
    cycle emulation with non-waiting fractions) or ``sequential``.
    """
    model = DepositionModel(length, n_sectors, seed)
    if engine == "cautious":
        return parallel.cautious_run(model, horizon, workers)
    if engine == "lockstep":
        return parallel.lockstep_emulate(model, horizon)
    if engine == "sequential":
        return parallel.sequential_run(model, horizon, record_causes=False)
    raise ValueError(f"unknown engine {engine!r}")


def particles_from_events(events: Sequence[parallel.Event]) -> list[tuple[float, float, float]]:
    """``(t, x, z)`` rows of a parallel-engine deposition trajectory."""
    return [(e.time, e.payload[0], e.payload[1]) for e in events]


@dataclass
class DensityProfile:
    counts: np.ndarray          # shape (height_bins, time_bins)
    height_edges: np.ndarray
    time_edges: np.ndarray
    density: np.ndarray         # counts per unit height per unit time

    @property
    def mass(self) -> int:
        return int(self.counts.sum())

    def rows(self) -> list[tuple[int, int, float]]:
        return [(h, b, float(self.density[h, b]))
                for h in range(self.counts.shape[0]) for b in range(self.counts.shape[1])]


def density_profile(
    traj: Sequence[tuple[float, float]],
    height_bins: int,
    time_bins: int,
    height_max: float | None = None,
    time_max: float | None = None,
) -> DensityProfile:
    """Histogram of ``(time, z)`` pairs over height ``z - 1/2`` and time.

    ``time`` may be an arrival index or a simulated time.
    """
    if height_bins < 1 or time_bins < 1:
        raise ValueError("bin counts must be positive")
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    ts = np.array([float(t) for t, _ in traj])
    hs = np.array([z - 0.5 for _, z in traj])
    hmax = height_max if height_max is not None else max(hs.max(), 0.0)
    tmax = time_max if time_max is not None else max(ts.max(), 0.0)
    # widen zero-width ranges so the lone value lands in the first bin
    hmax = hmax if hmax > 0 else 1.0
    tmax = tmax if tmax > 0 else 1.0
    h_edges = np.linspace(0.0, hmax, height_bins + 1)
    t_edges = np.linspace(min(0.0, ts.min()), tmax, time_bins + 1)
    hi = np.clip(np.searchsorted(h_edges, hs, side="right") - 1, 0, height_bins - 1)
    ti = np.clip(np.searchsorted(t_edges, ts, side="right") - 1, 0, time_bins - 1)
    counts = np.zeros((height_bins, time_bins), dtype=np.int64)
    np.add.at(counts, (hi, ti), 1)
    vol = np.outer(np.diff(h_edges), np.diff(t_edges))
    return DensityProfile(counts, h_edges, t_edges, counts / vol)


def overlap_violations(particles: Sequence[Particle], length: float, tol: float = 1e-9) -> int:
    """Count pairs closer than ``1 - tol`` (numpy, O(n^2) in blocks)."""
    if len(particles) < 2:
        return 0
    x = np.array([p.x for p in particles])
    z = np.array([p.z for p in particles])
    bad = 0
    for a in range(len(x)):
        dx = np.abs(x[a + 1:] - x[a])
        dx = np.minimum(dx, length - dx)
        near = dx < 1.0
        if near.any():
            dz = z[a + 1:][near] - z[a]
            bad += int(np.count_nonzero(dx[near] ** 2 + dz ** 2 < (1.0 - tol) ** 2))
    return bad


def unsupported(particles: Sequence[Particle], length: float, tol: float = 1e-9) -> list[int]:
    """Indices of particles resting on neither the substrate nor a lower particle."""
    bad = []
    by_order = sorted(particles, key=lambda p: p.m)
    x = np.array([p.x for p in by_order])
    z = np.array([p.z for p in by_order])
    for a, p in enumerate(by_order):
        if p.z == 0.5:
            continue
        dx = np.abs(x - p.x)
        dx = np.minimum(dx, length - dx)
        dist = np.sqrt(dx ** 2 + (z - p.z) ** 2)
        touch = (z < p.z) & (np.abs(dist - 1.0) <= tol)
        if not touch.any():
            bad.append(p.m)
    return bad
