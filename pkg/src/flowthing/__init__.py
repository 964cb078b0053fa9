"""Flowthing machine schemas, events, simulation and export."""

from .events import (
    EventDef,
    EventInstance,
    Trace,
    compose,
    contains,
    define_event,
    implies,
    parallel_groups,
    subtrace,
    trace_as_event,
    trace_time,
)
from .export import parse_trace_document, timeline, to_dot, trace_to_document
from .formatter import format_scenario, format_schema
from .model import FlowArc, Machine, Schema, Sphere, StageKind, StageRef, TriggerArc, region_closure, resolve
from .parser import load_scenario, load_schema, parse_scenario, parse_schema
from .scenario import Scenario, TimeMachine
from .simulator import SimResult, simulate, step
from .validator import validate

__version__ = "0.1.0"
