"""``multisim`` command line: one subcommand per model plus ``verify``."""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path
from typing import Sequence

from .config import SCHEMAS, COMMON, ConfigError, SimConfig, parse_config
from .core.events import format_time

HELP = {
    "billiards": "one-dimensional gutter billiards",
    "deposition": "ballistic deposition on a periodic substrate",
    "ising": "kinetic Ising model",
    "telecom": "two-provider telephone market",
    "circuitnet": "circuit-switched network routing",
    "verify": "run the cross-oracle verification suites",
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="multisim", description="Discrete-event simulation toolkit.")
    sub = p.add_subparsers(dest="model", required=True)
    for model, keys in SCHEMAS.items():
        sp = sub.add_parser(model, help=HELP[model])
        sp.add_argument("--config", help="flat key = value file; flags override it")
        if model == "verify":
            sp.add_argument("suite_arg", nargs="?", metavar="SUITE", choices=keys["suite"].choices,
                            help="suite to run (same as --suite)")
        for name, key in {**keys, **COMMON}.items():
            kw = dict(dest=name, default=None, help=key.help or None)
            if key.choices:
                kw["choices"] = key.choices
            else:
                kw["type"] = key.type
            sp.add_argument("--" + name.replace("_", "-"), **kw)
    return p


def _csv(path: Path, header: str, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        for r in rows:
            fh.write(",".join(format_time(x) if isinstance(x, float) else str(x) for x in r) + "\n")


def _metrics(out: Path, items: Sequence[tuple[str, object]]) -> None:
    _csv(out / "metrics.csv", "metric,value", items)


def run_billiards(cfg: SimConfig, out: Path) -> list[tuple[str, object]]:
    from . import billiards as b

    gutter = b.random_gutter(cfg["n"], cfg["seed"], cfg["diameter"], cfg["length"],
                             cfg["vmax"], cfg["growth"])
    if cfg["scheduler"] == "timedriven":
        res = b.run_timedriven(gutter, cfg["dt"], cfg["horizon"])
    elif cfg["scheduler"] == "lazy":
        res = b.run_lazy(gutter, cfg["horizon"])
    else:
        res = b.run_anticipatory(gutter, cfg["horizon"])
    res.event_log().write(out / "events.csv", ("time", "subject", "event_kind", "other"))
    (out / "final_state.csv").write_text(res.final_state_csv())
    return [("events", len(res.events)), ("advancements", res.advancements),
            ("status", res.status), ("t_end", res.t_end)]


def run_deposition(cfg: SimConfig, out: Path) -> list[tuple[str, object]]:
    from . import deposition as d
    from .core.rng import RandomStream

    metrics: list[tuple[str, object]] = []
    if cfg["engine"] == "sequential":
        parts = d.deposit_sequential(cfg["length"], cfg["particles"], RandomStream(cfg["seed"], "deposition"),
                                     cfg["sectors"])
        rows = [(p.m, p.x, p.z) for p in parts]
        series = [(p.m, p.z) for p in parts]
    else:
        res = d.deposit_parallel_cautious(cfg["length"], cfg["sectors"], cfg["horizon"], cfg["seed"],
                                          cfg["workers"], cfg["engine"])
        rows = [(m, e.payload[0], e.payload[1]) for m, e in enumerate(res.events)]
        series = [(e.time, e.payload[1]) for e in res.events]
        if res.fractions is not None:
            metrics += [("cycles", len(res.fractions)), ("mean_nonwaiting_fraction", res.mean_fraction)]
    _csv(out / "particles.csv", "m,x,z", rows)
    metrics.append(("particles", len(rows)))
    if series:
        prof = d.density_profile(series, cfg["height_bins"], cfg["time_bins"])
        _csv(out / "density.csv", "height_bin,time_bin,density", prof.rows())
    return metrics


def run_ising(cfg: SimConfig, out: Path) -> list[tuple[str, object]]:
    from . import ising
    from .core.rng import RandomStream

    params = ising.IsingParams(cfg["temperature"], cfg["field"], cfg["scale"])
    lat = ising.SpinLattice.random(cfg["n"], RandomStream(cfg["seed"], "ising-init"))
    stream = RandomStream(cfg["seed"], "ising")
    if cfg["variant"] == "uniformized":
        m0 = lat.magnetization()
        res = ising.run_uniformized(lat, params, cfg["updates"], stream)
        # replay accepted flips to recover the magnetization trace
        spins = list(ising.SpinLattice.random(cfg["n"], RandomStream(cfg["seed"], "ising-init")).spins)
        trace, m = [], m0
        for k, i in enumerate(res.sites):
            spins[i] = -spins[i]
            m += 2 * spins[i]
            trace.append((k + 1, m))
        _csv(out / "magnetization.csv", "accepted_flip,magnetization", trace)
        metrics = [("updates", res.updates), ("accepted", res.accepted),
                   ("acceptance", res.acceptance), ("mean_rate_ratio", res.mean_rate_ratio)]
    else:
        res = ising.run_dispenser_kmc(lat, params, cfg["horizon"], stream, cfg["variant"])
        _csv(out / "magnetization.csv", "time,magnetization",
             zip(res.times, res.magnetization))
        metrics = [("flips", res.flips), ("visits_per_event", res.visits_per_event)]
    grid = lat.grid()
    _csv(out / "spins.csv", "row," + ",".join(f"c{c}" for c in range(grid.shape[1])),
         ((r, *grid[r].tolist()) for r in range(grid.shape[0])))
    return metrics


def run_telecom(cfg: SimConfig, out: Path) -> list[tuple[str, object]]:
    from . import telecom as tc
    from .core.rng import RandomStream

    plans = (tc.Plan(cfg["p1_same"], cfg["p1_other"]), tc.Plan(cfg["p2_same"], cfg["p2_other"]))
    if cfg["graph"] == "random":
        market = tc.random_market(cfg["n"], cfg["degree"], cfg["seed"], plans, cfg["alpha"])
    else:
        market = tc.market_from_edges(cfg["n"], tc.read_edges(cfg["graph"]), cfg["seed"], plans, cfg["alpha"])
    stream = RandomStream(cfg["seed"], "telecom")
    if cfg["engine"] == "event":
        res = tc.run_event_driven(market, cfg["horizon"], stream, cfg["delegation"], cfg["report_dt"])
    else:
        res = tc.run_time_driven(market, cfg["dt"], cfg["horizon"], stream, cfg["report_dt"])
    _csv(out / "switches.csv", "time,customer,provider", res.events)
    _csv(out / "shares.csv", "time,provider1,provider2", res.share_series)
    return [("switches", len(res.times)), ("status", res.status),
            ("final_provider1", res.final_shares[0]), ("final_provider2", res.final_shares[1])]


def run_circuitnet(cfg: SimConfig, out: Path) -> list[tuple[str, object]]:
    from . import circuitnet as cn
    from . import parallel

    tr = cn.Traffic(cfg["rate"], cfg["hold"])
    scheme = cn.LoadClassScheme(cfg["boundaries"])
    pairs = cn.pairs_of(cfg["n"])
    counters: list[tuple[str, object]] = []
    if cfg["engine"] == "sequential":
        res = cn.run_network(cfg["n"], cfg["trunks"], tr, cfg["policy"], cfg["eval"],
                             cfg["horizon"], cfg["seed"], scheme)
        offered, blocked = res.offered, res.blocked
        counters = [("index_updates", res.index_updates), ("index_touched", res.index_touched),
                    ("link_events", res.link_events)]
        metrics: list[tuple[str, object]] = []
    else:
        model = cn.CircuitModel(cfg["n"], cfg["trunks"], tr, cfg["policy"], cfg["seed"], scheme)
        sr = parallel.syncrelax_run(model, cfg["horizon"], cfg["dt_step"], cfg["workers"])
        offered = [0] * len(pairs)
        blocked = [0] * len(pairs)
        for e in sr.events:
            offered[e.component] += 1
            blocked[e.component] += e.payload == cn.BLOCKED
        its = sr.iterations
        counters = [("strips", len(its)), ("iterations_total", sum(its)), ("iterations_max", max(its, default=0))]
        metrics = [("iterations_per_step", ";".join(map(str, its)))]
    rows = [(p, a, b, offered[p], blocked[p]) for p, (a, b) in enumerate(pairs)]
    tot_o, tot_b = sum(offered), sum(blocked)
    rows.append(("all", "", "", tot_o, tot_b))
    _csv(out / "blocking.csv", "pair,n1,n2,offered,blocked", rows)
    _csv(out / "counters.csv", "counter,value", counters)
    return metrics + [("offered", tot_o), ("blocked", tot_b),
                      ("blocking", tot_b / tot_o if tot_o else 0.0)]


def run_verify(cfg: SimConfig, out: Path) -> list[tuple[str, object]]:
    from .verify import report_csv, verify

    rows = verify(cfg["suite"], cfg["seed"], cfg["inject_fault"])
    text = report_csv(rows)
    (out / "verify.csv").write_text(text)
    sys.stdout.write(text)
    failed = sum(r[3] != "pass" for r in rows)
    return [("checks", len(rows)), ("failed", failed)]


RUNNERS = {
    "billiards": run_billiards,
    "deposition": run_deposition,
    "ising": run_ising,
    "telecom": run_telecom,
    "circuitnet": run_circuitnet,
    "verify": run_verify,
}


def config_from_args(ns: argparse.Namespace) -> SimConfig:
    keys = {**SCHEMAS[ns.model], **COMMON}
    overrides = {k: getattr(ns, k) for k in keys}
    positional = getattr(ns, "suite_arg", None)
    if positional is not None:
        if overrides["suite"] not in (None, positional):
            raise ConfigError(f"suite given twice: {positional!r} and {overrides['suite']!r}")
        overrides["suite"] = positional
    text = Path(ns.config).read_text() if ns.config else None
    return parse_config(ns.model, overrides, text)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = config_from_args(ns)
    except (ConfigError, OSError) as exc:
        parser.exit(2, f"multisim {ns.model}: error: {exc}\n")
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    cfg.write(out)
    t0 = time.perf_counter()
    metrics = RUNNERS[cfg.model](cfg, out)
    metrics = list(metrics) + [("wall_seconds", round(time.perf_counter() - t0, 6))]
    _metrics(out, metrics)
    if cfg.model == "verify":
        return 0 if dict(metrics)["failed"] == 0 else 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
