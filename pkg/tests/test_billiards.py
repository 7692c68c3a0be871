import math
import random

import numpy as np
import pytest

from multisim.billiards import (
    ADVANCE,
    PAIR,
    WALL,
    Ball,
    GutterConfig,
    LazyGutter,
    OverlapError,
    compare_logs,
    free_advance,
    predict_pair_collision,
    random_gutter,
    resolve_collision,
    run_anticipatory,
    run_lazy,
    run_timedriven,
)
from multisim.core import NEVER


def test_free_advance():
    assert free_advance(Ball(0, 0.0, 1.0), 1.0).x == 1.0
    b = Ball(0, 3.0, 0.0)
    assert free_advance(b, 17.5).x == 3.0


def test_free_advance_composes():
    b = Ball(0, 0.25, 0.5)
    assert free_advance(free_advance(b, 1.0), 3.0).x == free_advance(b, 3.0).x


def test_free_advance_rejects_past():
    with pytest.raises(ValueError):
        free_advance(Ball(0, 0.0, 1.0, last_update=2.0), 1.0)


def test_head_on_prediction():
    t = predict_pair_collision(Ball(0, 0.0, 1.0), Ball(1, 3.0, -1.0), 1.0, 0.0)
    assert t == 1.0


def test_equal_velocities_never_meet():
    assert predict_pair_collision(Ball(0, 0.0, 0.7), Ball(1, 3.0, 0.7), 1.0, 0.0) == NEVER


def test_overlap_halts():
    with pytest.raises(OverlapError):
        predict_pair_collision(Ball(0, 0.0, 1.0), Ball(1, 0.5, 0.0), 1.0, 0.0)


def _bisect(f, lo, hi, iters=200):
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_prediction_matches_bisection():
    rng = random.Random(8)
    for _ in range(1000):
        d = rng.uniform(0.2, 2.0)
        g = rng.choice([0.0, rng.uniform(0, 0.3)])
        now = rng.uniform(0, 5)
        bi = Ball(0, rng.uniform(-5, 5), rng.uniform(-2, 2), last_update=now - rng.uniform(0, 1))
        xi_now = bi.x + bi.v * (now - bi.last_update)
        bj = Ball(1, xi_now + d + g * now + rng.uniform(0, 5), rng.uniform(-2, 2), last_update=now)
        t = predict_pair_collision(bi, bj, d, now, g)
        if t == NEVER:
            assert bi.v - bj.v + g <= 0
            continue

        def gap(s):
            return (bj.x + bj.v * (s - now)) - (bi.x + bi.v * (s - bi.last_update)) - (d + g * s)

        root = _bisect(gap, now, t + 10 * (t - now) + 1)
        assert abs(t - root) <= 1e-10 * max(1.0, abs(root))


def test_resolve_collision_exchanges():
    a, b = resolve_collision(Ball(0, 0.0, 2.0), Ball(1, 1.0, -3.0))
    assert (a.v, b.v) == (-3.0, 2.0)
    assert (a.x, b.x) == (0.0, 1.0)
    a, b = resolve_collision(Ball(0, 0.0, 1.5), Ball(1, 1.0, 1.5))
    assert (a.v, b.v) == (1.5, 1.5)


def test_resolve_collision_conserves_momentum_energy():
    rng = random.Random(0)
    for _ in range(100):
        vi, vj = rng.uniform(-3, 3), rng.uniform(-3, 3)
        a, b = resolve_collision(Ball(0, 0, vi), Ball(1, 1, vj))
        assert a.v + b.v == vi + vj
        assert a.v ** 2 + b.v ** 2 == vi ** 2 + vj ** 2


@pytest.mark.parametrize("runner", [run_anticipatory, run_lazy])
def test_single_ball_period(runner):
    cfg = GutterConfig(x=[2.0], v=[0.5], diameter=1.0, x_left=0.0, x_right=6.0)
    res = runner(cfg, 100.0)
    kinds = [(k, s) for _t, k, _a, s in res.events]
    assert all(k == WALL for k, _ in kinds)
    assert [s for _, s in kinds] == [1, -1] * (len(kinds) // 2) + [1] * (len(kinds) % 2)
    times = [e[0] for e in res.events]
    period = 2 * (6.0 - 0.0 - 1.0) / 0.5
    gaps = np.diff(times[::2])
    assert np.allclose(gaps, period, rtol=0, atol=1e-12)


@pytest.mark.parametrize("runner", [run_anticipatory, run_lazy])
def test_single_ball_moving_left_hits_left_wall_first(runner):
    cfg = GutterConfig(x=[2.0], v=[-0.5], diameter=1.0, x_left=0.0, x_right=6.0)
    res = runner(cfg, 10.0)
    assert res.events[0] == (3.0, WALL, 0, -1)


def test_lazy_checks_last_ball_wall_against_earlier_pairing():
    # ball 2 is claimed by the (1, 2) pair before its own wall bounce is considered
    cfg = random_gutter(3, 35)
    assert run_lazy(cfg, 30.0).events == run_anticipatory(cfg, 30.0).events


def test_single_ball_lazy_has_no_advancements():
    cfg = GutterConfig(x=[2.0], v=[-0.3], x_right=6.0)
    assert run_lazy(cfg, 200.0).advancements == 0


def test_four_ball_dependency_scenario():
    # ball 2-3 contact (t4=1) and ball 4 wall bounce (t2=1.5) jointly cause a 3-4 contact
    cfg = GutterConfig(x=[1.5, 4.0, 6.0, 10.0], v=[0.0, 1.0, 0.0, 1.0], diameter=1.0,
                       x_left=0.0, x_right=12.0)
    res = run_anticipatory(cfg, 3.6)
    ev = [(t, k, a, b) for t, k, a, b in res.events]
    assert ev[0] == (1.0, PAIR, 1, 2)
    assert ev[1] == (1.5, WALL, 3, 1)
    t4, t2 = 1.0, 1.5
    x4_t2, v4_t2, x3_t4, v3_t4, d = 11.5, -1.0, 6.0, 1.0, 1.0
    t5 = t4 + (x4_t2 - x3_t4 + v4_t2 * (t4 - t2) - d) / (v3_t4 - v4_t2)
    assert ev[2] == (t5, PAIR, 2, 3)
    td = run_timedriven(cfg, 1e-4, 3.6)
    ok, worst = compare_logs(td.events, res.events, 2e-4)
    assert ok, worst


def test_lazy_preemption_gives_advancement():
    # order B, A, C: B-A is scheduled first, then C intercepts A earlier
    cfg = GutterConfig(x=[1.0, 4.0, 5.5], v=[1.0, 0.0, -2.0], x_left=-10, x_right=20)
    g = LazyGutter(cfg, record=False)
    g.schedule_initial()
    assert g.ev[0].kind == ADVANCE and g.ev[0].t == 2.0
    assert g.ev[1] is g.ev[2] and g.ev[1].t == 0.25


@pytest.mark.parametrize("seed", range(5))
def test_schedulers_agree_event_for_event(seed):
    cfg = random_gutter(100, seed)
    a = run_anticipatory(cfg, 40.0)
    b = run_lazy(cfg, 40.0)
    assert a.events == b.events
    assert a.x == b.x and a.v == b.v
    assert len(a.events) > 500


def test_speed_multiset_and_ball_ball_permutation():
    cfg = random_gutter(50, 9)
    res = run_anticipatory(cfg, 30.0, record=True)
    assert sorted(abs(v) for v in res.v) == sorted(abs(v) for v in cfg.v)
    # between wall bounces the signed multiset is only permuted
    walls = sum(1 for e in res.events if e[1] == WALL)
    assert walls > 0


def test_no_overlap_at_events():
    cfg = random_gutter(60, 4)
    res = run_lazy(cfg, 20.0, record=True)
    times = sorted({e[0] for e in res.events})
    traj = res.trajectories

    def pos(i, t):
        seg = [p for p in traj[i] if p[0] <= t][-1]
        return seg[1] + seg[2] * (t - seg[0])

    for t in times[::7]:
        xs = [pos(i, t) for i in range(cfg.n)]
        assert min(np.diff(xs)) >= cfg.diameter - 1e-9


def test_timedriven_converges():
    cfg = random_gutter(10, 3)
    exact = np.array(run_anticipatory(cfg, 10.0).x)
    errs = [np.max(np.abs(np.array(run_timedriven(cfg, dt, 10.0).x) - exact))
            for dt in (1e-2, 1e-3, 1e-4)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-2


def test_timedriven_head_on_swap_step():
    cfg = GutterConfig(x=[2.0, 5.0], v=[1.0, -1.0], x_left=0, x_right=20)
    res = run_timedriven(cfg, 0.3, 1.2)
    # contact at t=1.0 lies in the step (0.9, 1.2]
    assert res.events == [(pytest.approx(1.2), PAIR, 0, 1)]
    assert res.v == [-1.0, 1.0]


def test_timedriven_large_step_still_detects():
    cfg = GutterConfig(x=[2.0, 5.0], v=[1.0, -1.0], x_left=0, x_right=20)
    res = run_timedriven(cfg, 1.7, 1.7)
    assert [e[1] for e in res.events] == [PAIR]


def test_timedriven_no_balls():
    cfg = GutterConfig(x=[], v=[])
    assert run_timedriven(cfg, 0.1, 1.0).x == []


def test_timedriven_rejects_bad_dt():
    with pytest.raises(ValueError):
        run_timedriven(random_gutter(3, 0), -1.0, 1.0)


def test_swelling_reaches_jam():
    cfg = random_gutter(8, 2, length=20.0, growth=0.05)
    cfg.jam_tol = 1e-6
    res = run_anticipatory(cfg, 1e9, max_events=200_000)
    assert res.status in ("jammed", "max-events")
    t_jam = cfg.jam_time()
    assert res.t_end <= t_jam
    if res.status == "jammed":
        assert cfg.length - cfg.n * cfg.diameter_at(res.t_end) <= 1e-3
    lazy = run_lazy(cfg, 1e9, max_events=200_000)
    assert lazy.events == res.events


def test_swelling_collisions_separate():
    cfg = GutterConfig(x=[2.0, 4.0], v=[0.2, -0.2], diameter=1.0, x_left=0, x_right=10, growth=0.1)
    res = run_anticipatory(cfg, 5.0)
    t, kind, a, b = res.events[0]
    assert kind == PAIR
    assert res.v[0] - res.v[1] + 0.1 < 0 or len(res.events) > 1
