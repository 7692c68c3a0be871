import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from multisim.core import (
    NEVER,
    CausalityError,
    EventDescriptor,
    EventLog,
    EventQueue,
    MaintainedCounter,
    NoPendingEvents,
    RandomStream,
    RetryingUsers,
    counter_lazy_scan,
    counter_query,
    exp_from_uniform,
    exp_sample,
    queue_insert,
    queue_pop_min,
    timedriven_run,
)


def test_pop_returns_minimum():
    q = EventQueue()
    for t in (3.0, 1.0, 2.0):
        queue_insert(q, EventDescriptor(t, 0))
    assert queue_pop_min(q).time == 1.0


def test_singleton_queue():
    q = EventQueue()
    e = EventDescriptor(4.0, 2, "x")
    q.insert(e)
    assert q.pop() is e
    assert len(q) == 0


def test_empty_pop_is_distinct_condition():
    with pytest.raises(NoPendingEvents):
        EventQueue().pop()


def test_tie_break_by_subject_then_insertion():
    q = EventQueue()
    q.schedule(5.0, 7, "late")
    q.schedule(5.0, 2, "a")
    q.schedule(5.0, 2, "b")
    assert [q.pop().kind for _ in range(3)] == ["a", "b", "late"]


def test_causality_violation_rejected():
    q = EventQueue()
    q.schedule(2.0, 0)
    q.pop()
    with pytest.raises(CausalityError):
        q.schedule(1.0, 0)
    q.schedule(2.0, 1)  # equal to committed time is allowed


def test_never_sentinel_sorts_last():
    q = EventQueue()
    q.schedule(NEVER, 0, "never")
    q.schedule(1e300, 1, "far")
    assert q.pop().kind == "far"
    assert q.pop().time == NEVER


def test_cancel_skips_entry():
    q = EventQueue()
    a = q.schedule(1.0, 0, "a")
    q.schedule(2.0, 0, "b")
    q.cancel(a)
    assert len(q) == 1
    assert q.pop().kind == "b"


def test_random_inserts_pop_sorted():
    rng = random.Random(11)
    times = [rng.random() * 100 for _ in range(10_000)]
    q = EventQueue()
    for i, t in enumerate(times):
        q.schedule(t, i % 17)
    popped = [q.pop().time for _ in range(len(times))]
    assert popped == sorted(times)


def test_interleaved_insert_pop_matches_sorted_merge():
    rng = random.Random(5)
    q = EventQueue()
    reference = []
    out = []
    now = 0.0
    for step in range(2000):
        if reference and rng.random() < 0.45:
            e = q.pop()
            reference.sort()
            expected = reference.pop(0)
            assert (e.time, e.subject, e.seq) == expected
            now = e.time
            out.append(e.time)
        else:
            t = now + rng.random()
            e = q.schedule(t, rng.randrange(5))
            reference.append((t, e.subject, e.seq))
    assert out == sorted(out)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.booleans(), st.floats(0, 10), st.integers(0, 4)), max_size=200))
def test_heap_property_any_interleaving(ops):
    q = EventQueue()
    last = -1.0
    for is_pop, dt, subj in ops:
        if is_pop and len(q):
            e = q.pop()
            assert e.time >= last
            last = e.time
        else:
            q.schedule(q.now + dt, subj)


def test_exp_analytic_inversion():
    assert exp_from_uniform(math.exp(-1), 1.0) == pytest.approx(1.0, rel=1e-15)
    assert exp_from_uniform(math.exp(-2), 2.0) == pytest.approx(1.0, rel=1e-15)


@pytest.mark.parametrize("rate", [0.0, -1.0])
def test_exp_rejects_nonpositive_rate(rate):
    with pytest.raises(ValueError):
        exp_sample(RandomStream(0), rate)


def test_exp_rejects_boundary_uniform():
    with pytest.raises(ValueError):
        exp_from_uniform(0.0, 1.0)
    with pytest.raises(ValueError):
        exp_from_uniform(1.0, 1.0)


def test_exp_mean_and_ks():
    s = RandomStream(2024, "exp")
    xs = np.array([exp_sample(s, 3.0) for _ in range(100_000)])
    se = (1 / 3) / math.sqrt(len(xs))
    assert abs(xs.mean() - 1 / 3) < 3 * se
    d, p = stats.kstest(xs, "expon", args=(0, 1 / 3))
    assert p > 0.001


def test_stream_is_counter_addressable():
    a = RandomStream(9, ("clock", 3))
    draws = [a.uniform() for _ in range(5)]
    b = RandomStream(9, ("clock", 3))
    assert [b.uniform_at(c) for c in range(5)] == draws
    c = RandomStream(9, ("clock", 4))
    assert [c.uniform() for _ in range(5)] != draws


def test_uniform_array_matches_scalar_path():
    a = RandomStream(3, "v")
    b = RandomStream(3, "v")
    arr = a.uniform_array(1000)
    scalar = [b.uniform_at(i) for i in range(1000)]
    assert arr.tolist() == scalar
    assert a.counter == 1000


def test_distinct_streams_uncorrelated():
    a = RandomStream(1, 0).uniform_array(50_000)
    b = RandomStream(1, 1).uniform_array(50_000)
    r = np.corrcoef(a, b)[0, 1]
    assert abs(r) < 4 / math.sqrt(50_000)
    assert stats.kstest(a, "uniform").pvalue > 0.001


class _Drifter:
    def __init__(self, v):
        self.x, self.v, self.detections = 0.0, v, 0

    def advance(self, dt):
        self.x += self.v * dt

    def detect(self, t):
        self.detections += 1

    def trajectory(self):
        return self.x


def test_timedriven_run_step_count_and_motion():
    m = _Drifter(1.0)
    x = timedriven_run(m, 0.1, 1.0)
    assert x == pytest.approx(1.0, abs=1e-12)
    assert m.detections == 10
    m = _Drifter(1.0)
    timedriven_run(m, 0.3, 1.0)
    assert m.detections == 4  # ceil(1/0.3)
    assert m.x == pytest.approx(1.0)


def test_timedriven_run_rejects_bad_dt():
    with pytest.raises(ValueError):
        timedriven_run(_Drifter(1.0), 0.0, 1.0)


def test_counter_hooks():
    c = MaintainedCounter()
    c.on("up", 1)
    c.on("down", lambda n: -n)
    c.notify("up")
    c.notify("down", 3)
    c.notify("ignored")
    assert counter_query(c, 0.0) == -2


def test_counter_empty_system():
    m = RetryingUsers(channels=1, arrival_rate=0.0, mean_hold=1.0, retry_rate=1.0)
    assert m.run(5.0, 1.0)[-1][1:] == (0, 0)
    assert counter_lazy_scan(m) == 0


def test_counter_single_failed_arrival():
    m = RetryingUsers(channels=0, arrival_rate=1.0, mean_hold=1.0, retry_rate=1e-9, seed=3)
    first = m.queue.peek().time
    reports = m.run(first, first)
    assert reports[-1][1:] == (1, 1)


def test_counter_maintained_equals_lazy_everywhere():
    m = RetryingUsers(channels=3, arrival_rate=2.0, mean_hold=1.5, retry_rate=1.0, seed=17)
    reports = m.run(200.0, 0.2)
    assert len(reports) >= 1000
    assert all(a == b for _, a, b in reports)
    assert max(a for _, a, _b in reports) > 0


def test_event_log_csv_round_trips_times():
    log = EventLog()
    log.record(0.1 + 0.2, 3, "hit", 1.5, "x")
    text = log.to_csv()
    row = text.splitlines()[1].split(",")
    assert float(row[0]) == 0.1 + 0.2
    assert row[1:] == ["3", "hit", "1.5", "x"]
