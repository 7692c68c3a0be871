"""Event core: clock and queue, random streams, stepping harness, counters."""

from .counters import MaintainedCounter, RetryingUsers, counter_lazy_scan, counter_query
from .events import (
    NEVER,
    CausalityError,
    EventDescriptor,
    EventLog,
    EventQueue,
    NoPendingEvents,
    SimulationError,
    format_time,
    queue_insert,
    queue_pop_min,
)
from .rng import PoissonClock, RandomStream, event_stream, exp_from_uniform, exp_sample
from .stepper import step_count, timedriven_run

__all__ = [
    "NEVER", "CausalityError", "EventDescriptor", "EventLog", "EventQueue",
    "MaintainedCounter", "NoPendingEvents", "PoissonClock", "RandomStream", "RetryingUsers",
    "SimulationError", "counter_lazy_scan", "counter_query", "event_stream", "exp_from_uniform",
    "exp_sample", "format_time", "queue_insert", "queue_pop_min", "step_count",
    "timedriven_run",
]
