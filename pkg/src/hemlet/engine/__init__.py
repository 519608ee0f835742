"""Event-driven performance and energy model."""

from .costs import AcimStep, acim_step, dcim_op_cost, dcim_pes_per_head, simd_cost
from .events import EventSimulator, SimEvent, Task
from .sim import (CATEGORIES, DataflowMode, SimReport, SimulationError, breakdown_speedup,
                  invariant_violations, resolve_acim_chiplets, run, write_event_log)

__all__ = [
    "AcimStep", "acim_step", "dcim_op_cost", "dcim_pes_per_head", "simd_cost",
    "EventSimulator", "SimEvent", "Task",
    "CATEGORIES", "DataflowMode", "SimReport", "SimulationError", "breakdown_speedup",
    "invariant_violations", "resolve_acim_chiplets", "run", "write_event_log",
]
