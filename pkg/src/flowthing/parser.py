"""Parsers for ``.fm`` schema files and ``.fms`` scenario files.

Schema grammar (newlines are insignificant, ``;`` is an optional separator)::

    file     := item*
    item     := sphere | flow | trigger | event | trace
    sphere   := 'sphere' NAME '{' (sphere | machine)* '}'
    machine  := 'machine' NAME '{' ('stages' ':' kinds | 'storage' [':' kinds])* '}'
    flow     := 'flow' PATH '->' PATH
    trigger  := 'trigger' (PATH | '(' PATH '->' PATH ')') '~>' PATH
    event    := 'event' NAME [STRING] '{' eitem* '}'
    eitem    := 'region' ':' PATH (',' PATH)*
              | 'parts' ':' NAME (',' NAME)*
              | 'duration' INT
              | 'properties' ':' NAME (',' NAME)*
    trace    := 'trace' NAME ':' NAME (',' NAME)*

References are resolved in a second pass, so they may precede the
declarations they name.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .events import EventDef
from .model import (
    FlowArc,
    Machine,
    ModelError,
    NotFound,
    Ambiguous,
    Schema,
    Sphere,
    SphereRef,
    StageKind,
    StageRef,
    TriggerArc,
    region_closure,
    resolve,
)
from .scenario import Scenario, ScenarioError, TimeMachine
from .syntax import (
    Bail,
    ParseDiagnostic,
    ParseError,
    SourceSpan,
    TokenStream,
    decode,
    tokenize,
)

SCHEMA_KEYWORDS = frozenset({"sphere", "flow", "trigger", "event", "trace"})
SCENARIO_KEYWORDS = frozenset({"inject", "time_machine", "max_ticks"})


# -- raw declarations ---------------------------------------------------------


@dataclass
class _RawMachine:
    name: str
    span: SourceSpan
    stages: list[tuple[StageKind, SourceSpan]] = field(default_factory=list)
    storage: bool = False
    links: list[tuple[StageKind, SourceSpan]] = field(default_factory=list)


@dataclass
class _RawSphere:
    name: str
    span: SourceSpan
    children: list = field(default_factory=list)  # _RawSphere | _RawMachine in order


@dataclass
class _RawFlow:
    source: tuple[str, SourceSpan]
    target: tuple[str, SourceSpan]
    span: SourceSpan


@dataclass
class _RawTrigger:
    source: tuple[str, SourceSpan] | tuple[tuple[str, SourceSpan], tuple[str, SourceSpan]]
    target: tuple[str, SourceSpan]
    via_flow: bool
    span: SourceSpan


@dataclass
class _RawEvent:
    name: str
    span: SourceSpan
    label: str = ""
    region: list[tuple[str, SourceSpan]] = field(default_factory=list)
    parts: list[tuple[str, SourceSpan]] = field(default_factory=list)
    duration: int | None = None
    properties: list[str] = field(default_factory=list)


@dataclass
class _RawTrace:
    name: str
    span: SourceSpan
    events: list[tuple[str, SourceSpan]]


class _SchemaParser:
    def __init__(self, stream: TokenStream) -> None:
        self.ts = stream
        self.spheres: list[_RawSphere] = []
        self.flows: list[_RawFlow] = []
        self.triggers: list[_RawTrigger] = []
        self.events: list[_RawEvent] = []
        self.traces: list[_RawTrace] = []

    def parse(self) -> None:
        ts = self.ts
        while ts.peek.kind != "EOF":
            if ts.accept(";"):
                continue
            start = ts.i
            try:
                self.item()
            except Bail:
                if ts.i == start:
                    ts.next()
                ts.synchronize(SCHEMA_KEYWORDS)

    def item(self) -> None:
        tok = self.ts.peek
        if tok.is_word("sphere"):
            self.spheres.append(self.sphere())
        elif tok.is_word("flow"):
            self.flows.append(self.flow())
        elif tok.is_word("trigger"):
            self.triggers.append(self.trigger())
        elif tok.is_word("event"):
            self.events.append(self.event())
        elif tok.is_word("trace"):
            self.traces.append(self.trace())
        else:
            raise self.ts.fail("expected 'sphere', 'flow', 'trigger', 'event' or 'trace'", code="P-KEYWORD")

    def sphere(self) -> _RawSphere:
        ts = self.ts
        ts.expect_word("sphere")
        name = ts.ident("a sphere name")
        node = _RawSphere(name.text, name.span)
        ts.expect("{")
        while not ts.accept("}"):
            if ts.accept(";"):
                continue
            if ts.peek.is_word("sphere"):
                node.children.append(self.sphere())
            elif ts.peek.is_word("machine"):
                node.children.append(self.machine())
            else:
                raise ts.fail("expected 'sphere', 'machine' or '}'", code="P-KEYWORD")
        return node

    def _kind(self) -> tuple[StageKind, SourceSpan]:
        tok = self.ts.ident("a stage name")
        try:
            return StageKind(tok.text), tok.span
        except ValueError:
            kinds = ", ".join(k.value for k in StageKind)
            raise self.ts.fail(f"expected a stage name ({kinds})", tok, code="P-STAGE") from None

    def machine(self) -> _RawMachine:
        ts = self.ts
        ts.expect_word("machine")
        name = ts.ident("a machine name")
        node = _RawMachine(name.text, name.span)
        ts.expect("{")
        while not ts.accept("}"):
            if ts.accept(";"):
                continue
            if ts.peek.is_word("stages"):
                ts.next()
                ts.expect(":")
                node.stages.extend(ts.iter_separated(self._kind))
            elif ts.peek.is_word("storage"):
                ts.next()
                node.storage = True
                if ts.accept(":"):
                    node.links.extend(ts.iter_separated(self._kind))
            else:
                raise ts.fail("expected 'stages:', 'storage' or '}'", code="P-KEYWORD")
        return node

    def flow(self) -> _RawFlow:
        ts = self.ts
        kw = ts.expect_word("flow")
        src = ts.path()
        ts.expect("->")
        dst = ts.path()
        return _RawFlow(src, dst, kw.span)

    def trigger(self) -> _RawTrigger:
        ts = self.ts
        kw = ts.expect_word("trigger")
        if ts.accept("("):
            a = ts.path()
            ts.expect("->")
            b = ts.path()
            ts.expect(")")
            source, via_flow = (a, b), True
        else:
            source, via_flow = ts.path(), False
        ts.expect("~>")
        return _RawTrigger(source, ts.path(), via_flow, kw.span)

    def event(self) -> _RawEvent:
        ts = self.ts
        ts.expect_word("event")
        name = ts.ident("an event name")
        node = _RawEvent(name.text, name.span)
        if ts.peek.kind == "STRING":
            node.label = ts.next().value
        ts.expect("{")
        while not ts.accept("}"):
            if ts.accept(";"):
                continue
            tok = ts.peek
            if tok.is_word("region"):
                ts.next()
                ts.expect(":")
                node.region.extend(ts.iter_separated(ts.path))
            elif tok.is_word("parts"):
                ts.next()
                ts.expect(":")
                node.parts.extend((t.text, t.span) for t in ts.iter_separated(lambda: ts.ident("an event name")))
            elif tok.is_word("duration"):
                ts.next()
                val = ts.integer("a duration")
                if node.duration is not None:
                    ts.error("P-SHAPE", f"event {node.name!r} declares its duration twice", val.span)
                elif val.value < 1:
                    ts.error("P-SHAPE", "duration must be at least 1 tick", val.span)
                node.duration = val.value
            elif tok.is_word("properties"):
                ts.next()
                ts.expect(":")
                node.properties.extend(t.text for t in ts.iter_separated(lambda: ts.ident("a property name")))
            else:
                raise ts.fail("expected 'region:', 'parts:', 'duration', 'properties:' or '}'", code="P-KEYWORD")
        return node

    def trace(self) -> _RawTrace:
        ts = self.ts
        ts.expect_word("trace")
        name = ts.ident("a trace name")
        ts.expect(":")
        if ts.peek.kind != "IDENT":
            raise ts.fail(f"trace {name.text!r} needs at least one event", code="P-SHAPE")
        events = [(t.text, t.span) for t in ts.iter_separated(lambda: ts.ident("an event name"))]
        return _RawTrace(name.text, name.span, events)


# -- second pass --------------------------------------------------------------


class _Builder:
    def __init__(self, raw: _SchemaParser, diagnostics: list[ParseDiagnostic]) -> None:
        self.raw = raw
        self.diagnostics = diagnostics

    def error(self, code: str, message: str, span: SourceSpan) -> None:
        self.diagnostics.append(ParseDiagnostic("error", code, message, span))

    def machine(self, node: _RawMachine) -> Machine:
        kinds: list[StageKind] = []
        for kind, span in node.stages:
            if kind in kinds:
                self.error("V-EXCL", f"stage {kind.value!r} is declared twice in machine {node.name!r}", span)
                continue
            kinds.append(kind)
        if StageKind.RECEIVE in kinds:
            for kind, span in node.stages:
                if kind in (StageKind.ARRIVE, StageKind.ACCEPT):
                    self.error(
                        "V-RECEP",
                        f"machine {node.name!r} declares both 'receive' and {kind.value!r}; "
                        "reception is either combined (receive) or split (arrive, accept)",
                        span,
                    )
                    break
        links: list[StageKind] = []
        for kind, span in node.links:
            if kind not in kinds:
                self.error("P-STORAGE", f"storage link to undeclared stage {kind.value!r}", span)
            elif kind in links:
                self.error("P-STORAGE", f"duplicate storage link {kind.value!r}", span)
            else:
                links.append(kind)
        return Machine(node.name, tuple(kinds), node.storage, tuple(links))

    def sphere(self, node: _RawSphere, where: str) -> Sphere:
        self._check_unique(node.children, f"sphere {where}")
        subs = tuple(self.sphere(c, f"{where}.{c.name}") for c in node.children if isinstance(c, _RawSphere))
        machines = tuple(self.machine(c) for c in node.children if isinstance(c, _RawMachine))
        return Sphere(node.name, subs, machines)

    def _check_unique(self, nodes: list, where: str) -> None:
        seen: set[str] = set()
        for node in nodes:
            if node.name in seen:
                self.error("V-SPHERE", f"name {node.name!r} is used twice in {where}", node.span)
            seen.add(node.name)

    def _stage(self, schema: Schema, path: tuple[str, SourceSpan], rule: str, role: str) -> StageRef | None:
        text, span = path
        try:
            ref = resolve(schema, text)
        except Ambiguous:
            return None  # duplicate names were already reported
        except NotFound as exc:
            self.error(rule, f"{role} {text!r} does not resolve: {exc}", span)
            return None
        if not isinstance(ref, StageRef):
            what = "sphere" if isinstance(ref, SphereRef) else "machine"
            self.error(rule, f"{role} {text!r} names a {what}, not a stage", span)
            return None
        return ref

    def build(self) -> Schema | None:
        raw = self.raw
        self._check_unique(raw.spheres, "the schema root")
        spheres = tuple(self.sphere(s, s.name) for s in raw.spheres)
        static = Schema(spheres)

        flows: list[FlowArc] = []
        seen_flows: dict[tuple[StageRef, StageRef], FlowArc] = {}
        for rf in raw.flows:
            src = self._stage(static, rf.source, "V-FLOW", "flow source")
            dst = self._stage(static, rf.target, "V-FLOW", "flow target")
            if src is None or dst is None:
                continue
            if src == dst:
                self.error("V-FLOW", f"flow from {src} to itself", rf.source[1])
                continue
            if (src, dst) in seen_flows:
                self.error("P-DUP", f"flow {src} -> {dst} is declared twice", rf.span)
                continue
            arc = FlowArc(src, dst, len(flows))
            seen_flows[(src, dst)] = arc
            flows.append(arc)

        triggers: list[TriggerArc] = []
        for rt in raw.triggers:
            target = self._stage(static, rt.target, "V-TRIG", "trigger target")
            if rt.via_flow:
                a = self._stage(static, rt.source[0], "V-TRIG", "trigger source")
                b = self._stage(static, rt.source[1], "V-TRIG", "trigger source")
                source = seen_flows.get((a, b)) if a and b else None
                if a and b and source is None:
                    self.error("V-TRIG", f"trigger source flow {a} -> {b} is not declared", rt.source[0][1])
            else:
                source = self._stage(static, rt.source, "V-TRIG", "trigger source")
            if source is None or target is None:
                continue
            triggers.append(TriggerArc(source, target, len(triggers)))

        try:
            static = Schema(spheres, tuple(flows), tuple(triggers), name=static.name)
        except ModelError as exc:
            self.error(exc.rule or "P-MODEL", str(exc), SourceSpan(1, 1, 0, raw.ts.tokens[-1].span.file))
            return None
        events = self.events(static)
        traces = self.traces(events)
        if self.diagnostics:
            return None
        return Schema(spheres, tuple(flows), tuple(triggers), tuple(events), tuple(traces))

    def events(self, static: Schema) -> list[EventDef]:
        key = static.fingerprint()
        by_name: dict[str, _RawEvent] = {}
        for ev in self.raw.events:
            if ev.name in by_name:
                self.error("P-DUP", f"event {ev.name!r} is defined twice", ev.span)
                continue
            by_name[ev.name] = ev

        done: dict[str, EventDef | None] = {}
        active: set[str] = set()

        def build(ev: _RawEvent) -> EventDef | None:
            if ev.name in done:
                return done[ev.name]
            active.add(ev.name)
            refs: list = []
            ok = True
            for text, span in ev.region:
                try:
                    refs.append(resolve(static, text))
                except Ambiguous:
                    ok = False
                except NotFound as exc:
                    self.error("V-REGION", f"region of event {ev.name!r}: {text!r} does not resolve: {exc}", span)
                    ok = False
            parts: list[EventDef] = []
            for pname, span in ev.parts:
                if pname in active:
                    self.error("V-REGION", f"event {ev.name!r} is composed from itself via {pname!r}", span)
                    ok = False
                elif pname not in by_name:
                    self.error("V-REGION", f"event {ev.name!r} is composed from undefined event {pname!r}", span)
                    ok = False
                else:
                    part = build(by_name[pname])
                    if part is None:
                        ok = False
                    else:
                        parts.append(part)
            active.discard(ev.name)
            if ok and not refs and not parts:
                self.error("V-REGION", f"event {ev.name!r} has an empty region", ev.span)
                ok = False
            result = None
            if ok:
                items = set(refs)
                for part in parts:
                    items |= part.region
                duration = ev.duration if ev.duration is not None else max([p.duration for p in parts] or [1])
                labels = set(ev.properties)
                for part in parts:
                    labels |= part.property_labels
                try:
                    result = EventDef(
                        name=ev.name,
                        region=region_closure(static, items),
                        label=ev.label,
                        duration=max(duration, 1),
                        property_labels=frozenset(labels),
                        schema_key=key,
                    )
                except (ValueError, NotFound) as exc:
                    self.error("V-REGION", str(exc), ev.span)
            done[ev.name] = result
            return result

        out = []
        for ev in self.raw.events:
            if by_name.get(ev.name) is ev:
                built = build(ev)
                if built is not None:
                    out.append(built)
        return out

    def traces(self, events: list[EventDef]) -> list[tuple[str, tuple[str, ...]]]:
        names = {ev.name for ev in self.raw.events}
        seen: set[str] = set()
        out = []
        for tr in self.raw.traces:
            if tr.name in seen:
                self.error("P-DUP", f"trace {tr.name!r} is declared twice", tr.span)
                continue
            seen.add(tr.name)
            for ename, span in tr.events:
                if ename not in names:
                    self.error("V-TRACE", f"trace {tr.name!r} mentions undefined event {ename!r}", span)
            out.append((tr.name, tuple(e for e, _ in tr.events)))
        return out


def parse_schema(source: str | bytes, file: str = "<string>") -> Schema:
    """Parse schema text. Raises :class:`ParseError` carrying every diagnostic."""
    diagnostics: list[ParseDiagnostic] = []
    text = decode(source, file, diagnostics)
    stream = TokenStream(tokenize(text, file, diagnostics), diagnostics)
    raw = _SchemaParser(stream)
    raw.parse()
    schema = None
    if not diagnostics:
        try:
            schema = _Builder(raw, diagnostics).build()
        except (ModelError, ValueError) as exc:  # defensive; builder checks first
            diagnostics.append(ParseDiagnostic("error", getattr(exc, "rule", None) or "P-MODEL", str(exc), SourceSpan(1, 1, 0, file)))
    if diagnostics or schema is None:
        raise ParseError(diagnostics)
    return _named(schema, Path(file).stem if file != "<string>" else "")


def _named(schema: Schema, name: str) -> Schema:
    return Schema(
        schema.spheres, schema.flows, schema.triggers, schema.events, schema.declared_traces, name=name
    )


def load_schema(path: str | Path) -> Schema:
    path = Path(path)
    return parse_schema(path.read_bytes(), str(path))


# -- scenarios ----------------------------------------------------------------


def parse_scenario(source: str | bytes, file: str = "<string>", *, max_ticks: int | None = None) -> Scenario:
    """Parse scenario text.

    ``max_ticks`` overrides (or supplies) the tick bound given in the text.
    """
    diagnostics: list[ParseDiagnostic] = []
    text = decode(source, file, diagnostics)
    ts = TokenStream(tokenize(text, file, diagnostics), diagnostics)
    injections: list[tuple[str, int, SourceSpan]] = []
    time_machine: TimeMachine | None = None
    tm_span: SourceSpan | None = None
    bound: int | None = None
    bound_span: SourceSpan | None = None

    while ts.peek.kind != "EOF":
        if ts.accept(";"):
            continue
        start = ts.i
        try:
            tok = ts.peek
            if tok.is_word("inject"):
                ts.next()
                path, _ = ts.path()
                ts.expect("@")
                tick = ts.integer("a tick")
                if tick.value < 0:
                    ts.error("P-SCENARIO", f"injection tick must not be negative (got {tick.value})", tick.span)
                injections.append((path, tick.value, tick.span))
            elif tok.is_word("time_machine"):
                ts.next()
                ts.expect_word("period")
                period = ts.integer("a period")
                ts.expect_word("count")
                count = ts.integer("a slice count")
                ts.expect("->")
                targets = [t.text for t in ts.iter_separated(lambda: ts.ident("an event name"))]
                if time_machine is not None or tm_span is not None:
                    ts.error("P-DUP", "only one time_machine is allowed", tok.span)
                tm_span = tok.span
                if period.value < 1:
                    ts.error("P-SCENARIO", "time machine period must be at least 1", period.span)
                elif count.value < 1:
                    ts.error("P-SCENARIO", "time machine slice count must be at least 1", count.span)
                else:
                    time_machine = TimeMachine(period.value, count.value, tuple(targets))
            elif tok.is_word("max_ticks"):
                ts.next()
                val = ts.integer("a tick bound")
                if bound is not None:
                    ts.error("P-DUP", "max_ticks is given twice", tok.span)
                if val.value < 1:
                    ts.error("P-SCENARIO", "max_ticks must be at least 1", val.span)
                bound, bound_span = val.value, val.span
            else:
                raise ts.fail("expected 'inject', 'time_machine' or 'max_ticks'", code="P-KEYWORD")
        except Bail:
            if ts.i == start:
                ts.next()
            ts.synchronize(SCENARIO_KEYWORDS)

    if max_ticks is not None:
        bound = max_ticks
        bound_span = None
    if bound is None:
        ts.error("P-SCENARIO", "max_ticks is missing", ts.tokens[-1].span)
    elif bound >= 1:
        for path, tick, span in injections:
            if tick >= bound:
                ts.error("P-SCENARIO", f"injection {path} @ {tick} is not before max_ticks ({bound})", span)
        if time_machine is not None and time_machine.period * time_machine.slice_count > bound:
            ts.error(
                "P-SCENARIO",
                f"time machine needs {time_machine.period * time_machine.slice_count} ticks but max_ticks is {bound}",
                tm_span or SourceSpan(1, 1, 0, file),
            )
    elif bound_span is None:
        ts.error("P-SCENARIO", "max_ticks must be at least 1", SourceSpan(1, 1, 0, file))

    if diagnostics:
        raise ParseError(diagnostics)
    name = Path(file).stem if file != "<string>" else ""
    try:
        return Scenario(tuple((p, t) for p, t, _ in injections), time_machine, bound, name=name)
    except ScenarioError as exc:  # defensive; checked above
        raise ParseError([ParseDiagnostic("error", "P-SCENARIO", str(exc), SourceSpan(1, 1, 0, file))]) from None


def load_scenario(path: str | Path, *, max_ticks: int | None = None) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_bytes(), str(path), max_ticks=max_ticks)
