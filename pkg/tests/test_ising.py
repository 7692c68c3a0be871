import math

import numpy as np
import pytest

from multisim import ising
from multisim.core.rng import RandomStream


def exact_stationary(n: int, temperature: float, field: float) -> np.ndarray:
    """Stationary law of the flip generator on all 2**(n*n) configurations."""
    size = n * n
    Q = np.zeros((1 << size, 1 << size))
    for code in range(1 << size):
        s = [1 if code >> i & 1 else -1 for i in range(size)]
        for i in range(size):
            r, c = divmod(i, n)
            k = (s[((r - 1) % n) * n + c] + s[((r + 1) % n) * n + c]
                 + s[r * n + (c - 1) % n] + s[r * n + (c + 1) % n])
            de = 2.0 * s[i] * (k + field)
            rate = math.exp(-max(de, 0.0) / temperature)
            Q[code, code ^ (1 << i)] += rate
            Q[code, code] -= rate
    A = np.vstack([Q.T, np.ones(1 << size)])
    b = np.zeros((1 << size) + 1)
    b[-1] = 1.0
    return np.linalg.lstsq(A, b, rcond=None)[0]


def test_flip_rate_metropolis():
    p = ising.IsingParams(2.0, field=0.5)
    assert ising.flip_rate(1, -4, p) == 1.0
    assert ising.flip_rate(1, 4, p) == pytest.approx(math.exp(-2 * 4.5 / 2.0))
    assert ising.flip_rate(-1, 4, p) == 1.0
    assert ising.flip_rate(-1, -2, p) == pytest.approx(math.exp(-2 * 1.5 / 2.0))
    with pytest.raises(ValueError):
        ising.IsingParams(0.0)


def test_class_index_is_a_bijection_onto_ten_classes():
    idx = {ising.class_index(s, k) for s in (-1, 1) for k in ising.NEIGHBOR_SUMS}
    assert idx == set(range(10))
    p = ising.IsingParams(1.7, 0.2, scale=3.0)
    table = ising.rate_table(p)
    for s in (-1, 1):
        for k in ising.NEIGHBOR_SUMS:
            assert table[ising.class_index(s, k)] == ising.flip_rate(s, k, p)


def test_lattice_neighbours_and_codes():
    lat = ising.SpinLattice(3)
    assert lat.nbrs[0] == (6, 1, 3, 2)
    assert lat.neighbor_sum(4) == 4
    lat.spins[4] = -1
    assert lat.magnetization() == 7
    assert lat.state_code() == (1 << 9) - 1 - (1 << 4)
    assert lat.refresh_set(4) == [1, 3, 4, 5, 7]
    with pytest.raises(ValueError):
        ising.SpinLattice(2, [1, 0, 1, 1])


@pytest.mark.parametrize("variant", ["tree", "class"])
def test_small_lattice_matches_exact_stationary_law(variant):
    T, h, horizon, batches = 2.5, 0.3, 150_000.0, 30
    pi = exact_stationary(2, T, h)
    lat = ising.SpinLattice(2, [1, -1, -1, 1])
    res = ising.run_dispenser_kmc(lat, ising.IsingParams(T, h), horizon, RandomStream(11, variant), variant)
    # occupation fractions per time batch give a batch-means error bar
    times = np.array(res.times)
    edges = np.linspace(0, horizon, batches + 1)
    fractions = []
    cut = np.searchsorted(times, edges)
    codes = res.initial_code ^ np.concatenate(
        ([0], np.bitwise_xor.accumulate(np.left_shift(1, np.array(res.sites, dtype=np.int64)))))
    for b in range(batches):
        lo, hi = edges[b], edges[b + 1]
        a, z = cut[b], cut[b + 1]
        bounds = np.concatenate(([lo], times[a:z], [hi]))
        occ = np.bincount(codes[a:z + 1], weights=np.diff(bounds), minlength=16)
        fractions.append(occ / (hi - lo))
    fractions = np.array(fractions)
    mean = fractions.mean(axis=0)
    se = fractions.std(axis=0, ddof=1) / math.sqrt(batches)
    assert np.all(np.abs(mean - pi) <= 4.5 * se + 1e-3)
    total = ising.occupation(res, 4, horizon)
    assert total.sum() == pytest.approx(horizon)
    assert np.allclose(total / horizon, mean, atol=1e-9)


def test_magnetization_trace_is_consistent():
    lat = ising.SpinLattice.random(6, RandomStream(1, "init"))
    m0 = lat.magnetization()
    res = ising.run_dispenser_kmc(lat, ising.IsingParams(2.0), 3.0, RandomStream(2, "k"))
    steps = np.diff(np.concatenate(([m0], np.array(res.magnetization))))
    assert set(np.abs(steps).tolist()) <= {2}
    assert res.magnetization[-1] == lat.magnetization()
    assert list(res.times) == sorted(res.times) and res.times[-1] < 3.0


def test_max_flips_stops_early():
    lat = ising.SpinLattice(4)
    res = ising.run_dispenser_kmc(lat, ising.IsingParams(5.0), 1e9, RandomStream(0, "k"), max_flips=50)
    assert res.status == "max-flips" and res.flips == 50


def test_unknown_variant():
    with pytest.raises(ValueError):
        ising.run_dispenser_kmc(ising.SpinLattice(2), ising.IsingParams(1.0), 1.0, RandomStream(0, "x"), "heap")


def test_delegation_cost_grows_for_tree_but_not_for_classes():
    cost = {}
    for variant in ("tree", "class"):
        for n in (8, 32):
            lat = ising.SpinLattice.random(n, RandomStream(n, "init"))
            res = ising.run_dispenser_kmc(lat, ising.IsingParams(2.3), 1e9, RandomStream(n, "k"),
                                          variant, max_flips=3000)
            cost[variant, n] = res.visits_per_event
    assert cost["tree", 32] >= cost["tree", 8] + 3.5   # log2 of the 16x size ratio is 4
    assert cost["class", 32] <= 10 and cost["class", 8] <= 10
    assert abs(cost["class", 32] - cost["class", 8]) < 1.5


def test_uniformized_acceptance_tracks_rate_ratio():
    lat = ising.SpinLattice.random(16, RandomStream(3, "init"))
    res = ising.run_uniformized(lat, ising.IsingParams(1.5), 200_000, RandomStream(3, "u"))
    assert res.updates == 200_000
    assert res.acceptance == pytest.approx(res.mean_rate_ratio, abs=4 * math.sqrt(0.25 / res.updates) + 2e-3)
    assert res.magnetization == lat.magnetization()


def test_uniformized_low_temperature_rejects_most_updates():
    lat = ising.SpinLattice(8)
    res = ising.run_uniformized(lat, ising.IsingParams(0.5), 20_000, RandomStream(0, "u"))
    assert res.acceptance < 1e-3
