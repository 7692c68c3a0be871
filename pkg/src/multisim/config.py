"""Flat ``key = value`` run configuration.

Every subcommand declares a schema of typed keys.  Values come from an
optional config file and are overridden by command-line flags.  Unknown
keys are rejected, every missing required key is reported in one message,
and the effective configuration can be written back in a form that parses
to an equal configuration.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable


class ConfigError(ValueError):
    pass


REQUIRED = object()


@dataclass(frozen=True)
class Key:
    type: Callable[[str], Any]
    default: Any = REQUIRED
    choices: tuple | None = None
    help: str = ""


def _float_list(text: str) -> tuple[float, ...]:
    text = text.strip()
    if not text:
        return ()
    return tuple(float(x) for x in text.replace(";", ",").split(","))


def _fmt(v: Any) -> str:
    if isinstance(v, tuple):
        return ",".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


COMMON = {
    "seed": Key(int, 0, help="master seed; all randomness derives from it"),
    "out": Key(str, "out", help="output directory"),
}

SCHEMAS: dict[str, dict[str, Key]] = {
    "billiards": {
        "scheduler": Key(str, "lazy", ("timedriven", "lazy", "anticipatory")),
        "n": Key(int, REQUIRED, help="number of balls"),
        "diameter": Key(float, 1.0),
        "growth": Key(float, 0.0, help="swelling rate g of D(t) = D + g t"),
        "length": Key(float, None, help="gutter length (default 2 n D + D)"),
        "vmax": Key(float, 1.0),
        "horizon": Key(float, REQUIRED),
        "dt": Key(float, None, help="step of the time-driven scheduler"),
    },
    "deposition": {
        "engine": Key(str, "sequential", ("sequential", "cautious", "lockstep")),
        "length": Key(float, 10.0),
        "sectors": Key(int, 10),
        "particles": Key(int, None, help="particle count (sequential engine)"),
        "horizon": Key(float, None, help="simulated time (cautious and lockstep engines)"),
        "workers": Key(int, 1),
        "height_bins": Key(int, 10),
        "time_bins": Key(int, 10),
    },
    "ising": {
        "variant": Key(str, "tree", ("tree", "class", "uniformized")),
        "n": Key(int, REQUIRED),
        "temperature": Key(float, REQUIRED),
        "field": Key(float, 0.0),
        "scale": Key(float, 1.0),
        "horizon": Key(float, None, help="simulated time (tree and class variants)"),
        "updates": Key(int, None, help="update count (uniformized variant)"),
    },
    "telecom": {
        "engine": Key(str, "event", ("event", "time")),
        "delegation": Key(str, "tree", ("tree", "scan")),
        "n": Key(int, REQUIRED),
        "graph": Key(str, "random", help="'random' for a random sparse graph, or a caller,callee,minutes CSV"),
        "degree": Key(float, 6.0, help="average calls per customer of the random graph"),
        "p1_same": Key(float, 0.10),
        "p1_other": Key(float, 0.25),
        "p2_same": Key(float, 0.18),
        "p2_other": Key(float, 0.18),
        "alpha": Key(float, 0.1),
        "horizon": Key(float, REQUIRED),
        "dt": Key(float, None, help="step of the time-driven engine"),
        "report_dt": Key(float, 1.0),
    },
    "circuitnet": {
        "engine": Key(str, "sequential", ("sequential", "syncrelax")),
        "eval": Key(str, "lazy", ("lazy", "anticipatory")),
        "policy": Key(str, "lba", ("lba", "alba")),
        "n": Key(int, 10),
        "trunks": Key(int, 20),
        "rate": Key(float, 1.0, help="call attempts per unit time per node pair"),
        "hold": Key(float, 14.0, help="mean holding time"),
        "boundaries": Key(_float_list, (0.8, 0.9)),
        "horizon": Key(float, REQUIRED),
        "workers": Key(int, 1),
        "dt_step": Key(float, None, help="committed-time step of synchronous relaxation"),
    },
    "verify": {
        "suite": Key(str, "all", ("all", "dispenser", "billiards", "timedriven", "parallel", "circuitnet", "telecom")),
        "inject_fault": Key(str, "none", ("none", "tree-node")),
    },
}


@dataclass(frozen=True)
class SimConfig:
    model: str
    values: tuple[tuple[str, Any], ...] = field(default_factory=tuple)

    def __getitem__(self, key: str) -> Any:
        return dict(self.values)[key]

    def get(self, key: str, default: Any = None) -> Any:
        return dict(self.values).get(key, default)

    def as_dict(self) -> dict[str, Any]:
        return dict(self.values)

    def dumps(self) -> str:
        lines = [f"model = {self.model}"]
        for k, v in self.values:
            if v is not None:
                lines.append(f"{k} = {_fmt(v)}")
        return "\n".join(lines) + "\n"

    def write(self, directory: str | Path) -> Path:
        path = Path(directory) / "config.txt"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.dumps())
        return path


def schema(model: str) -> dict[str, Key]:
    if model not in SCHEMAS:
        raise ConfigError(f"unknown model {model!r}")
    return {**SCHEMAS[model], **COMMON}


def read_file(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        k, v = (s.strip() for s in line.split("=", 1))
        if k in out:
            raise ConfigError(f"line {lineno}: duplicate key {k!r}")
        out[k] = v
    return out


def parse_config(model: str, overrides: dict[str, Any] | None = None, text: str | None = None) -> SimConfig:
    """Merge file text and flag overrides into a validated :class:`SimConfig`.

    ``overrides`` maps keys to already-typed values (``None`` means "not
    given").  File values are strings converted through the schema.
    """
    keys = schema(model)
    raw = read_file(text) if text else {}
    file_model = raw.pop("model", None)
    if file_model is not None and file_model != model:
        raise ConfigError(f"config file is for model {file_model!r}, not {model!r}")
    unknown = sorted(set(raw) - set(keys))
    if unknown:
        raise ConfigError(f"unknown keys for {model}: {', '.join(unknown)}")
    values: dict[str, Any] = {}
    for k, v in raw.items():
        try:
            values[k] = keys[k].type(v)
        except ValueError as exc:
            raise ConfigError(f"bad value for {k!r}: {v!r} ({exc})") from None
    for k, v in (overrides or {}).items():
        if k not in keys:
            raise ConfigError(f"unknown keys for {model}: {k}")
        if v is not None:
            values[k] = v
    missing = [k for k, spec in keys.items() if spec.default is REQUIRED and k not in values]
    if missing:
        raise ConfigError(f"missing required parameters for {model}: {', '.join(missing)}")
    for k, spec in keys.items():
        values.setdefault(k, spec.default)
        if spec.choices and values[k] not in spec.choices:
            raise ConfigError(f"{k} must be one of {', '.join(spec.choices)}; got {values[k]!r}")
    _check_combinations(model, values)
    return SimConfig(model, tuple(sorted(values.items())))


def _check_combinations(model: str, v: dict[str, Any]) -> None:
    """Reject engine/parameter combinations that make no sense, before running."""
    def need(cond: bool, msg: str):
        if not cond:
            raise ConfigError(msg)

    if model == "billiards":
        if v["scheduler"] == "timedriven":
            need(v["dt"] is not None, "the timedriven scheduler needs dt")
            need(v["dt"] > 0, "dt must be positive")
        else:
            need(v["dt"] is None, f"dt only applies to the timedriven scheduler, not {v['scheduler']} "
                                  "(event-driven schedulers have no step)")
        need(v["n"] >= 0, "n must be nonnegative")
    elif model == "deposition":
        if v["engine"] == "sequential":
            need(v["particles"] is not None, "the sequential engine needs particles")
            need(v["horizon"] is None, "horizon applies to the cautious and lockstep engines; "
                                       "the sequential engine counts particles")
        else:
            need(v["horizon"] is not None, f"the {v['engine']} engine needs horizon")
            need(v["particles"] is None, "particles applies to the sequential engine only")
        need(v["length"] / v["sectors"] >= 1.0, "sector width length/sectors must be at least 1")
        if v["engine"] != "cautious":
            need(v["workers"] == 1, "workers applies to the cautious engine only")
    elif model == "ising":
        if v["variant"] == "uniformized":
            need(v["updates"] is not None, "the uniformized variant needs updates")
            need(v["horizon"] is None, "horizon does not apply to the uniformized variant")
        else:
            need(v["horizon"] is not None, f"the {v['variant']} variant needs horizon")
            need(v["updates"] is None, "updates applies to the uniformized variant only")
        need(v["temperature"] > 0, "temperature must be positive")
    elif model == "telecom":
        if v["engine"] == "time":
            need(v["dt"] is not None, "the time engine needs dt")
            need(v["delegation"] == "tree", "delegation applies to the event engine only")
        else:
            need(v["dt"] is None, "dt only applies to the time engine")
    elif model == "circuitnet":
        if v["engine"] == "syncrelax":
            need(v["eval"] == "lazy", "the syncrelax engine evaluates policies lazily; eval must be lazy")
        else:
            need(v["workers"] == 1, "workers applies to the syncrelax engine only")
            need(v["dt_step"] is None, "dt_step applies to the syncrelax engine only")
