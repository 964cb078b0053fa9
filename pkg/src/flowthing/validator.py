"""Static semantic checks on a schema.

Rules:

``V-EXCL``    a stage kind appears at most once per machine
``V-RECEP``   combined reception (receive) excludes arrive/accept
``V-FLOW``    intra-machine flows follow the stage adjacency table
``V-XBOUND``  cross-machine flows leave from transfer and land on transfer, receive or arrive
``V-TRIG``    trigger ends resolve; warn when the target does not start a flow
``V-REGION``  event regions are nonempty, resolvable and closed; warn when disconnected
``V-TRACE``   declared traces name defined events
``V-SPHERE``  names are unique at each nesting level
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

from .events import EventDef
from .model import (
    FlowArc,
    NotFound,
    Schema,
    Sphere,
    StageKind,
    StageRef,
    region_closure,
)

RULES = ("V-EXCL", "V-RECEP", "V-FLOW", "V-XBOUND", "V-TRIG", "V-REGION", "V-TRACE", "V-SPHERE")

K = StageKind
ADJACENCY: dict[StageKind, frozenset[StageKind]] = {
    K.ARRIVE: frozenset({K.ACCEPT}),
    K.ACCEPT: frozenset({K.PROCESS, K.RELEASE}),
    K.RECEIVE: frozenset({K.PROCESS, K.RELEASE}),
    K.CREATE: frozenset({K.PROCESS, K.RELEASE}),
    K.PROCESS: frozenset({K.RELEASE}),
    K.RELEASE: frozenset({K.TRANSFER}),
    K.TRANSFER: frozenset({K.RECEIVE, K.ARRIVE}),
}
CROSS_TARGETS = frozenset({K.TRANSFER, K.RECEIVE, K.ARRIVE})
TRIGGER_TARGETS = frozenset({K.CREATE, K.RECEIVE, K.ARRIVE})


@dataclass(frozen=True)
class ValidationDiagnostic:
    severity: str
    rule: str
    message: str
    subject: str

    def __post_init__(self) -> None:
        if self.rule not in RULES:
            raise ValueError(f"unknown rule {self.rule!r}")

    def __str__(self) -> str:
        return f"{self.severity}[{self.rule}] {self.subject}: {self.message}"


def _error(rule: str, subject: object, message: str) -> ValidationDiagnostic:
    return ValidationDiagnostic("error", rule, message, str(subject))


def _warning(rule: str, subject: object, message: str) -> ValidationDiagnostic:
    return ValidationDiagnostic("warning", rule, message, str(subject))


def check_flow_arc(arc: FlowArc, schema: Schema) -> ValidationDiagnostic | None:
    for end in (arc.source, arc.target):
        if not schema.has_stage(end):
            return _error("V-FLOW", arc, f"endpoint {end} does not resolve")
    src, dst = arc.source.stage, arc.target.stage
    if arc.intra_machine:
        if dst not in ADJACENCY[src]:
            allowed = ", ".join(sorted(k.value for k in ADJACENCY[src]))
            return _error(
                "V-FLOW",
                arc,
                f"{src.value} cannot flow to {dst.value} inside one machine (allowed: {allowed}); "
                "use a trigger for other dependencies",
            )
        return None
    if src is not K.TRANSFER or dst not in CROSS_TARGETS:
        return _error(
            "V-XBOUND",
            arc,
            f"flows between machines go from transfer to transfer, receive or arrive, not "
            f"{src.value} to {dst.value}; use a trigger instead",
        )
    return None


def _spheres(schema: Schema, out: list[ValidationDiagnostic]) -> None:
    def unique(names: list[str], where: str) -> None:
        seen: set[str] = set()
        for name in names:
            if name in seen:
                out.append(_error("V-SPHERE", f"{where}.{name}" if where else name, f"name {name!r} is used twice at this level"))
            seen.add(name)

    def visit(sphere: Sphere, path: str) -> None:
        unique([s.name for s in sphere.subspheres] + [m.thing for m in sphere.machines], path)
        for machine in sphere.machines:
            subject = f"{path}.{machine.thing}"
            kinds = list(machine.stages)
            if len(set(kinds)) != len(kinds):
                out.append(_error("V-EXCL", subject, "a stage kind is declared more than once"))
            if K.RECEIVE in kinds and (K.ARRIVE in kinds or K.ACCEPT in kinds):
                out.append(
                    _error("V-RECEP", subject, "declares receive together with arrive/accept; reception is combined or split, not both")
                )
        for sub in sphere.subspheres:
            visit(sub, f"{path}.{sub.name}")

    unique([s.name for s in schema.spheres], "")
    for sphere in schema.spheres:
        visit(sphere, sphere.name)


def _connected(stages: list[StageRef], schema: Schema) -> bool:
    if len(stages) <= 1:
        return True
    members = set(stages)
    adj: dict[StageRef, set[StageRef]] = defaultdict(set)

    def link(a: StageRef, b: StageRef) -> None:
        if a in members and b in members:
            adj[a].add(b)
            adj[b].add(a)

    for arc in schema.flows:
        link(arc.source, arc.target)
    for trig in schema.triggers:
        if isinstance(trig.source, FlowArc):
            link(trig.source.source, trig.target)
            link(trig.source.target, trig.target)
        else:
            link(trig.source, trig.target)
    seen = {stages[0]}
    todo = [stages[0]]
    while todo:
        for nxt in adj[todo.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                todo.append(nxt)
    return len(seen) == len(members)


def _region(ev: EventDef, schema: Schema, out: list[ValidationDiagnostic]) -> None:
    if not ev.region:
        out.append(_error("V-REGION", ev.name, "region is empty"))
        return
    try:
        closed = region_closure(schema, ev.region)
    except NotFound as exc:
        out.append(_error("V-REGION", ev.name, f"region does not resolve: {exc}"))
        return
    if closed != ev.region:
        out.append(_error("V-REGION", ev.name, "region is not closed under the flows between its stages"))
    stages = sorted(ev.stages)
    if not _connected(stages, schema):
        out.append(_warning("V-REGION", ev.name, "region stages are not connected by flows or triggers"))


def validate(schema: Schema) -> list[ValidationDiagnostic]:
    """All diagnostics for ``schema``, in a fixed order. Empty means valid."""
    out: list[ValidationDiagnostic] = []
    _spheres(schema, out)
    for arc in schema.flows:
        diag = check_flow_arc(arc, schema)
        if diag is not None:
            out.append(diag)
    flows = set(schema.flows)
    for trig in schema.triggers:
        if not schema.has_stage(trig.target):
            out.append(_error("V-TRIG", trig, f"target {trig.target} does not resolve"))
            continue
        source_ok = trig.source in flows if isinstance(trig.source, FlowArc) else schema.has_stage(trig.source)
        if not source_ok:
            out.append(_error("V-TRIG", trig, f"source {trig.source} does not resolve"))
        if trig.target.stage not in TRIGGER_TARGETS:
            out.append(
                _warning("V-TRIG", trig, f"triggers usually start a flow (create, receive, arrive), not {trig.target.stage.value}")
            )
    names: set[str] = set()
    for ev in schema.events:
        if ev.name in names:
            out.append(_error("V-REGION", ev.name, "event name is defined twice"))
        names.add(ev.name)
        _region(ev, schema, out)
    for trace_name, seq in schema.declared_traces:
        for name in seq:
            if name not in names:
                out.append(_error("V-TRACE", trace_name, f"mentions undefined event {name!r}"))
    return out


def errors(diagnostics: list[ValidationDiagnostic]) -> list[ValidationDiagnostic]:
    return [d for d in diagnostics if d.severity == "error"]
