"""Deterministic discrete-tick execution of a schema under a scenario.

One call to :func:`step` runs tick ``T = state.clock``:

1. the time machine emits its slice due at ``T`` (if any); every target
   event gets an instance spanning ``[T, T + duration)`` and the instance
   schedules a token at each create stage of the event's region for ``T + 1``;
2. tokens alive before ``T`` move along their first outgoing flow (by
   declaration order) or quiesce when there is none;
3. scheduled creations due at ``T`` run, then the scenario's injections at ``T``;
4. every trigger whose source stage is occupied at ``T`` (or whose source flow
   was traversed at ``T``) schedules a token at its target for ``T + 1``.

Occupancy-driven event instances are derived from the log afterwards: per
event and per token, from the first to the last tick that token sits inside
the event's region, with the ticks it spent outside recorded as gaps.
Time-machine targets only get slice instances.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .events import EventDef, EventInstance, Trace
from .model import NotFound, Schema, StageKind, StageRef, outgoing, resolve_stage
from .scenario import Scenario
from .validator import errors, validate


class SimulationError(RuntimeError):
    pass


class ValidationFailed(SimulationError):
    def __init__(self, diagnostics) -> None:
        self.diagnostics = list(diagnostics)
        super().__init__("schema has validation errors: " + "; ".join(str(d) for d in self.diagnostics))


class UnresolvedScenarioRef(SimulationError):
    pass


QUIESCENCE = "quiescence"
MAX_TICKS = "max_ticks"
MAX_TICKS_WARNING = "MaxTicksExceededWithActivity"


@dataclass(frozen=True)
class Token:
    id: int
    thing: str
    at: StageRef
    created_at: int


@dataclass(frozen=True)
class LogEntry:
    tick: int
    token: int
    thing: str
    at: StageRef | None  # None once the token has quiesced

    @property
    def quiesced(self) -> bool:
        return self.at is None

    def __str__(self) -> str:
        where = "quiesced" if self.at is None else str(self.at)
        return f"{self.tick} #{self.token} {self.thing} {where}"


@dataclass(frozen=True)
class SliceFiring:
    tick: int
    events: tuple[str, ...]


@dataclass(frozen=True)
class SimState:
    clock: int = 0
    tokens: tuple[Token, ...] = ()
    pending: tuple[tuple[int, StageRef], ...] = ()  # (due tick, target) in scheduling order
    slices_emitted: int = 0
    next_id: int = 0
    log: tuple[LogEntry, ...] = ()
    slices: tuple[SliceFiring, ...] = ()


@dataclass(frozen=True)
class SimResult:
    trace: Trace
    log: tuple[LogEntry, ...]
    terminated: str
    ticks: int
    slices: tuple[SliceFiring, ...] = ()
    warnings: tuple[str, ...] = ()
    schema_name: str = field(default="", compare=False)
    scenario_name: str = field(default="", compare=False)


def time_machine_slices(period: int, slice_count: int) -> list[int]:
    if period < 1 or slice_count < 1:
        raise ValueError("time machine needs period >= 1 and slice_count >= 1")
    return [k * period for k in range(slice_count)]


@dataclass(frozen=True)
class _Plan:
    """Scenario references resolved against the schema."""

    injections: tuple[tuple[StageRef, int], ...]
    slice_ticks: tuple[int, ...]
    targets: tuple[EventDef, ...]


def _plan(schema: Schema, scenario: Scenario) -> _Plan:
    injections = []
    for path, tick in scenario.injections:
        try:
            injections.append((resolve_stage(schema, path), tick))
        except NotFound as exc:
            raise UnresolvedScenarioRef(f"injection {path!r}: {exc}") from None
    targets: list[EventDef] = []
    slice_ticks: tuple[int, ...] = ()
    tm = scenario.time_machine
    if tm is not None:
        slice_ticks = tuple(time_machine_slices(tm.period, tm.slice_count))
        for name in tm.targets:
            ev = schema.event(name)
            if ev is None:
                raise UnresolvedScenarioRef(f"time machine target {name!r} is not a defined event")
            targets.append(ev)
    return _Plan(tuple(injections), slice_ticks, tuple(targets))


def _creates(ev: EventDef, schema: Schema) -> list[StageRef]:
    order = schema.stage_order()
    return sorted((s for s in ev.stages if s.stage is StageKind.CREATE), key=order.__getitem__)


def _step(schema: Schema, state: SimState, plan: _Plan) -> SimState:
    t = state.clock
    pending = list(state.pending)
    slices = list(state.slices)
    emitted = state.slices_emitted
    log: list[LogEntry] = []

    # (1) time machine
    if emitted < len(plan.slice_ticks) and plan.slice_ticks[emitted] == t:
        emitted += 1
        slices.append(SliceFiring(t, tuple(ev.name for ev in plan.targets)))
        for ev in plan.targets:
            pending.extend((t + 1, ref) for ref in _creates(ev, schema))

    # (2) movement of tokens that existed before this tick
    live: list[Token] = []
    traversed = set()
    for tok in state.tokens:
        arcs = outgoing(schema, tok.at)
        if arcs:
            arc = arcs[0]
            traversed.add(arc)
            live.append(replace(tok, at=arc.target))
        else:
            log.append(LogEntry(t, tok.id, tok.thing, None))

    # (3) creations: scheduled triggers first, then injections
    next_id = state.next_id
    due = [ref for when, ref in pending if when == t]
    pending = [(when, ref) for when, ref in pending if when != t]
    due.extend(ref for ref, tick in plan.injections if tick == t)
    for ref in due:
        live.append(Token(next_id, ref.machine, ref, t))
        next_id += 1

    for tok in live:
        log.append(LogEntry(t, tok.id, tok.thing, tok.at))
    log.sort(key=lambda e: e.token)

    # (4) triggers
    occupied = {tok.at for tok in live}
    for trig in schema.triggers:
        if trig.source in occupied or trig.source in traversed:
            pending.append((t + 1, trig.target))

    return SimState(
        clock=t + 1,
        tokens=tuple(live),
        pending=tuple(pending),
        slices_emitted=emitted,
        next_id=next_id,
        log=state.log + tuple(log),
        slices=tuple(slices),
    )


def _check(schema: Schema, scenario: Scenario) -> _Plan:
    errs = errors(validate(schema))
    if errs:
        raise ValidationFailed(errs)
    return _plan(schema, scenario)


def step(schema: Schema, state: SimState, scenario: Scenario) -> SimState:
    """Advance ``state`` by exactly one tick."""
    return _step(schema, state, _check(schema, scenario))


def _idle(state: SimState, plan: _Plan) -> bool:
    return (
        not state.tokens
        and not state.pending
        and state.slices_emitted >= len(plan.slice_ticks)
        and all(tick < state.clock for _, tick in plan.injections)
    )


def simulate(schema: Schema, scenario: Scenario) -> SimResult:
    plan = _check(schema, scenario)
    state = SimState()
    while not _idle(state, plan) and state.clock < scenario.max_ticks:
        state = _step(schema, state, plan)
    terminated = QUIESCENCE if _idle(state, plan) else MAX_TICKS
    warnings = (MAX_TICKS_WARNING,) if terminated == MAX_TICKS else ()
    return SimResult(
        trace=build_trace(schema, state, plan, scenario.max_ticks),
        log=state.log,
        terminated=terminated,
        ticks=state.clock,
        slices=state.slices,
        warnings=warnings,
        schema_name=schema.name,
        scenario_name=scenario.name,
    )


def build_trace(schema: Schema, state: SimState, plan: _Plan, max_ticks: int) -> Trace:
    rank = {ev.name: i for i, ev in enumerate(schema.events)}
    # (rank, token or slice order) keeps members of a group in declaration order
    keyed: list[tuple[int, int, int, EventInstance]] = []
    for n, firing in enumerate(state.slices):
        for name in firing.events:
            ev = schema.event(name)
            end = min(firing.tick + ev.duration, max_ticks)
            keyed.append((firing.tick, rank[name], n, EventInstance(name, firing.tick, end)))

    targeted = {ev.name for ev in plan.targets}
    ticks_by_token: dict[int, list[tuple[int, StageRef]]] = {}
    for entry in state.log:
        if entry.at is not None:
            ticks_by_token.setdefault(entry.token, []).append((entry.tick, entry.at))
    for ev in schema.events:
        if ev.name in targeted:
            continue
        region = ev.stages
        for token_id in sorted(ticks_by_token):
            ticks = [tick for tick, at in ticks_by_token[token_id] if at in region]
            if not ticks:
                continue
            gaps = tuple((a + 1, b) for a, b in zip(ticks, ticks[1:]) if b > a + 1)
            keyed.append((ticks[0], rank[ev.name], token_id, EventInstance(ev.name, ticks[0], ticks[-1] + 1, gaps)))
    keyed.sort(key=lambda k: k[:3])
    return Trace.from_instances(k[3] for k in keyed)


def run_steps(schema: Schema, scenario: Scenario, count: int) -> SimState:
    state = SimState()
    for _ in range(count):
        state = step(schema, state, scenario)
    return state
