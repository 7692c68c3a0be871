"""Cross-oracle verification suites behind ``multisim verify``.

Each suite compares a fast implementation with its reference and returns
rows ``(suite, check, value, status)``.  Reports contain no timings, so the
same seed always yields the same bytes.
"""

from __future__ import annotations

import random

import numpy as np

from . import billiards, circuitnet, parallel, telecom
from .core.rng import RandomStream
from .deposition import DepositionModel
from .dispenser import RateTree, linear_scan_select

Row = tuple[str, str, str, str]


def _row(suite: str, check: str, value, ok: bool) -> Row:
    return (suite, check, str(value), "pass" if ok else "fail")


def suite_dispenser(seed: int, fault: str = "none") -> list[Row]:
    rng = random.Random(seed)
    mismatches = 0
    cases = 2000
    for _ in range(cases):
        n = rng.randint(2, 256)
        rates = [rng.random() if rng.random() < 0.8 else 0.0 for _ in range(n)]
        rates[rng.randrange(n)] = 1.0
        tree = RateTree(rates)
        if fault == "tree-node":
            tree.node[2] *= 0.5  # corrupt the left child of the root
        for _ in range(4):
            q = rng.random() or 0.5
            mismatches += tree.select(q) != linear_scan_select(rates, q)
    tree = RateTree(512)
    leaves = [0.0] * 512
    for _ in range(10_000):
        i = rng.randrange(512)
        leaves[i] = rng.random() * 10
        tree.update(i, leaves[i])
    s = sum(leaves)
    rel = abs(tree.total - s) / s
    return [
        _row("dispenser", "tree_vs_scan_mismatches", mismatches, mismatches == 0),
        _row("dispenser", "root_vs_leaf_sum_ok", rel <= 1e-9, rel <= 1e-9),
    ]


def suite_billiards(seed: int, fault: str = "none") -> list[Row]:
    rows = []
    diffs = 0
    for k in range(5):
        cfg = billiards.random_gutter(40, seed * 1000 + k)
        a = billiards.run_anticipatory(cfg, 20.0)
        b = billiards.run_lazy(cfg, 20.0)
        diffs += a.events != b.events or a.x != b.x or a.v != b.v
    rows.append(_row("billiards", "lazy_vs_anticipatory_differences", diffs, diffs == 0))
    return rows


def suite_timedriven(seed: int, fault: str = "none") -> list[Row]:
    cfg = billiards.random_gutter(10, seed)
    exact = np.array(billiards.run_anticipatory(cfg, 5.0).x)
    errs = [float(np.max(np.abs(np.array(billiards.run_timedriven(cfg, dt, 5.0).x) - exact)))
            for dt in (1e-2, 1e-3, 1e-4)]
    monotone = errs[0] >= errs[1] >= errs[2]
    return [
        _row("timedriven", "final_error_dt_1e-2", f"{errs[0]:.3e}", True),
        _row("timedriven", "final_error_dt_1e-3", f"{errs[1]:.3e}", True),
        _row("timedriven", "final_error_dt_1e-4", f"{errs[2]:.3e}", True),
        _row("timedriven", "monotone_convergence", monotone, monotone),
    ]


def suite_parallel(seed: int, fault: str = "none") -> list[Row]:
    rows = []
    dep = lambda: DepositionModel(10.0, 10, seed)
    ref = parallel.sequential_run(dep(), 100.0, record_causes=False).trajectory_csv()
    lock = parallel.lockstep_emulate(dep(), 100.0)
    rows.append(_row("parallel", "lockstep_equals_sequential", lock.trajectory_csv() == ref,
                     lock.trajectory_csv() == ref))
    for w in (1, 2, 4):
        same = parallel.cautious_run(dep(), 100.0, workers=w).trajectory_csv() == ref
        rows.append(_row("parallel", f"cautious_w{w}_equals_sequential", same, same))
    sp = parallel.RandomSprinkle(16, 2, seed=seed)
    sref = parallel.sequential_run(sp, 20.0)
    for w in (1, 3):
        sr = parallel.syncrelax_run(sp, 20.0, workers=w)
        same = sr.events == sref.events
        rows.append(_row("parallel", f"syncrelax_w{w}_equals_sequential", same, same))
    levels = parallel.strip_levels(sref, sr.strips)
    bound = all(it <= max(lv, 1) for it, lv in zip(sr.iterations, levels))
    rows.append(_row("parallel", "iterations_within_levels", bound, bound))
    return rows


def suite_circuitnet(seed: int, fault: str = "none") -> list[Row]:
    rows = []
    tr = circuitnet.Traffic(1.0, 16.0)
    for policy in ("lba", "alba"):
        a = circuitnet.run_network(10, 20, tr, policy, "lazy", 60.0, seed)
        b = circuitnet.run_network(10, 20, tr, policy, "anticipatory", 60.0, seed)
        mism = sum(x != y for x, y in zip(a.decisions, b.decisions)) + abs(len(a.decisions) - len(b.decisions))
        rows.append(_row("circuitnet", f"{policy}_decision_mismatches", mism, mism == 0))
        rows.append(_row("circuitnet", f"{policy}_blocked_calls", a.total_blocked, True))
    return rows


def suite_telecom(seed: int, fault: str = "none") -> list[Row]:
    logs = []
    for mode in ("tree", "scan"):
        m = telecom.random_market(300, 4, seed)
        r = telecom.run_event_driven(m, 50.0, RandomStream(seed, "telecom"), delegation=mode)
        logs.append(r.events)
    same = logs[0] == logs[1]
    return [_row("telecom", "tree_vs_scan_identical", same, same),
            _row("telecom", "switch_events", len(logs[0]), True)]


SUITES = {
    "dispenser": suite_dispenser,
    "billiards": suite_billiards,
    "timedriven": suite_timedriven,
    "parallel": suite_parallel,
    "circuitnet": suite_circuitnet,
    "telecom": suite_telecom,
}


def verify(suite: str = "all", seed: int = 0, fault: str = "none") -> list[Row]:
    names = list(SUITES) if suite == "all" else [suite]
    rows: list[Row] = []
    for name in names:
        if name not in SUITES:
            raise ValueError(f"unknown suite {name!r}")
        rows.extend(SUITES[name](seed, fault))
    return rows


def report_csv(rows: list[Row]) -> str:
    lines = ["suite,check,value,status"] + [",".join(r) for r in rows]
    overall = all(r[3] == "pass" for r in rows)
    lines.append(f"all,overall,{len(rows)},{'pass' if overall else 'fail'}")
    return "\n".join(lines) + "\n"
