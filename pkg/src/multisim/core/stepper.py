"""Fixed-increment (time-driven) harness."""

from __future__ import annotations

import math
from typing import Protocol


class SteppedModel(Protocol):
    def advance(self, dt: float) -> None: ...

    def detect(self, t: float) -> None: ...

    def trajectory(self): ...


def step_count(dt: float, horizon: float) -> int:
    n = math.ceil(horizon / dt)
    # guard against ceil overshooting by one ulp of the quotient
    while n > 0 and (n - 1) * dt >= horizon:
        n -= 1
    return n


def timedriven_run(model: SteppedModel, dt: float, horizon: float):
    """Advance ``model`` to ``horizon`` in increments of ``dt``.

    The last increment is shortened so the run ends exactly at ``horizon``.
    Interaction detection runs once per step, after the advance.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    t = 0.0
    for k in range(1, step_count(dt, horizon) + 1):
        t_next = min(k * dt, horizon)
        model.advance(t_next - t)
        t = t_next
        model.detect(t)
    return model.trajectory()
