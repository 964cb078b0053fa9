"""DOT diagrams, JSON trace documents and plain-text timelines.

Every function here is pure and byte-stable: output depends only on the
arguments and always uses LF line endings.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .events import EventDef, EventInstance, Trace
from .model import FlowArc, MachineRef, Schema, Sphere, StageRef, walk_spheres
from .simulator import SimResult

PALETTE = (
    "#fde68a",
    "#bfdbfe",
    "#bbf7d0",
    "#fecaca",
    "#ddd6fe",
    "#fed7aa",
    "#a5f3fc",
    "#f5d0fe",
    "#d9f99d",
    "#e5e7eb",
)


class ExportError(ValueError):
    pass


def node_id(*parts: str) -> str:
    return "_".join(p.replace(".", "_") for p in parts).lower()


def _q(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def stage_node(ref: StageRef) -> str:
    return node_id(*ref.sphere_path, ref.machine, ref.stage.value)


def to_dot(schema: Schema, overlay: list[EventDef | str] | None = None) -> str:
    """Render ``schema`` as a DOT digraph, optionally highlighting event regions.

    Overlay entries may be event definitions or names of events declared in
    the schema.
    """
    events: list[EventDef] = []
    for item in overlay or ():
        if isinstance(item, str):
            ev = schema.event(item)
            if ev is None:
                raise ExportError(f"unknown event {item!r}")
            item = ev
        events.append(item)

    fills: dict[StageRef, list[str]] = {}
    for i, ev in enumerate(events):
        color = PALETTE[i % len(PALETTE)]
        for ref in sorted(ev.stages):
            fills.setdefault(ref, []).append(color)

    out = ["digraph fm {", "  compound=true;", "  rankdir=LR;", '  node [shape=box, style=rounded, fontname="Helvetica", fontsize=10];']

    def sphere(s: Sphere, path: tuple[str, ...], depth: int) -> None:
        pad = "  " * depth
        out.append(f"{pad}subgraph {_q('cluster_' + node_id(*path))} {{")
        out.append(f"{pad}  label={_q(s.name)};")
        for machine in s.machines:
            mpath = (*path, machine.thing)
            out.append(f"{pad}  subgraph {_q('cluster_' + node_id(*mpath))} {{")
            out.append(f"{pad}    label={_q(machine.thing)};")
            out.append(f"{pad}    style=dashed;")
            mref = MachineRef(path, machine.thing)
            for kind in machine.stages:
                ref = mref.stage(kind)
                attrs = [f"label={_q(kind.value)}"]
                colors = fills.get(ref)
                if colors:
                    style = "rounded,filled" if len(colors) == 1 else "rounded,striped"
                    attrs.append(f"style={_q(style)}")
                    attrs.append(f"fillcolor={_q(':'.join(colors))}")
                out.append(f"{pad}    {_q(stage_node(ref))} [{', '.join(attrs)}];")
            if machine.has_storage:
                out.append(f"{pad}    {_q(node_id(*mpath, 'storage'))} [label=\"storage\", shape=cylinder, style=solid];")
            out.append(f"{pad}  }}")
        for sub in s.subspheres:
            sphere(sub, (*path, sub.name), depth + 1)
        out.append(f"{pad}}}")

    for s in schema.spheres:
        sphere(s, (s.name,), 1)

    for arc in schema.flows:
        out.append(f"  {_q(stage_node(arc.source))} -> {_q(stage_node(arc.target))};")
    for trig in schema.triggers:
        if isinstance(trig.source, FlowArc):
            src = stage_node(trig.source.target)
            out.append(f'  {_q(src)} -> {_q(stage_node(trig.target))} [style=dashed, label="via flow"];')
        else:
            out.append(f"  {_q(stage_node(trig.source))} -> {_q(stage_node(trig.target))} [style=dashed];")
    for path, s in walk_spheres(schema):
        for machine in s.machines:
            store = node_id(*path, machine.thing, "storage")
            for kind in machine.storage_links:
                ref = MachineRef(path, machine.thing).stage(kind)
                out.append(f"  {_q(stage_node(ref))} -> {_q(store)} [style=dotted, dir=both, arrowhead=box, arrowtail=box];")

    if events:
        out.append('  subgraph "cluster_legend" {')
        out.append('    label="events";')
        for i, ev in enumerate(events):
            text = ev.name + (f": {ev.label}" if ev.label else "")
            color = PALETTE[i % len(PALETTE)]
            out.append(f"    {_q(f'legend_{i}')} [label={_q(text)}, style=\"rounded,filled\", fillcolor={_q(color)}];")
        out.append("  }")
    out.append("}")
    return "\n".join(out) + "\n"


# -- trace documents ------------------------------------------------------------


@dataclass(frozen=True)
class TraceDocument:
    events: tuple[dict, ...] = ()
    meta: dict = field(default_factory=dict)

    def to_json(self) -> str:
        doc = {
            "meta": {key: self.meta.get(key, "") for key in ("schema", "scenario", "terminated")},
            "events": [
                {
                    "name": e["name"],
                    "start": e["start"],
                    "end": e["end"],
                    "gaps": [list(g) for g in e["gaps"]],
                    "group": e["group"],
                }
                for e in self.events
            ],
        }
        return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"

    def trace(self) -> Trace:
        return Trace.from_instances(
            EventInstance(e["name"], e["start"], e["end"], tuple(tuple(g) for g in e["gaps"])) for e in self.events
        )


def trace_document(trace: Trace, *, schema: str = "", scenario: str = "", terminated: str = "") -> TraceDocument:
    records = []
    for g, group in enumerate(trace.groups):
        for inst in group:
            records.append(
                {"name": inst.event, "start": inst.start, "end": inst.end, "gaps": [list(x) for x in inst.gaps], "group": g}
            )
    records.sort(key=lambda r: (r["start"], r["name"]))
    return TraceDocument(tuple(records), {"schema": schema, "scenario": scenario, "terminated": terminated})


def trace_to_document(result: SimResult) -> TraceDocument:
    return trace_document(
        result.trace, schema=result.schema_name, scenario=result.scenario_name, terminated=result.terminated
    )


def parse_trace_document(text: str | bytes) -> TraceDocument:
    try:
        data = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ExportError(f"not a trace document: {exc}") from None
    if not isinstance(data, dict) or not isinstance(data.get("events"), list):
        raise ExportError("trace document needs a top-level object with an 'events' list")
    meta = data.get("meta", {})
    if not isinstance(meta, dict):
        raise ExportError("'meta' must be an object")
    events = []
    starts: dict[int, int] = {}
    for i, e in enumerate(data["events"]):
        try:
            name, start, end, group = e["name"], e["start"], e["end"], e["group"]
            gaps = [tuple(g) for g in e.get("gaps", [])]
        except (KeyError, TypeError):
            raise ExportError(f"event record {i} is missing a field") from None
        if not isinstance(name, str) or not all(isinstance(v, int) for v in (start, end, group)):
            raise ExportError(f"event record {i} has a field of the wrong type")
        if any(len(g) != 2 or not all(isinstance(v, int) for v in g) for g in gaps):
            raise ExportError(f"event record {i} has a malformed gap")
        if starts.setdefault(group, start) != start:
            raise ExportError(f"event record {i}: group {group} mixes start ticks")
        events.append({"name": name, "start": start, "end": end, "gaps": [list(g) for g in gaps], "group": group})
    if sorted(starts) != list(range(len(starts))):
        raise ExportError("group indices must be contiguous from 0")
    if [starts[g] for g in sorted(starts)] != sorted(starts.values()):
        raise ExportError("group indices must follow start order")
    if events != sorted(events, key=lambda r: (r["start"], r["name"])):
        raise ExportError("event records must be sorted by (start, name)")
    doc = TraceDocument(tuple(events), {k: str(meta.get(k, "")) for k in ("schema", "scenario", "terminated")})
    try:
        doc.trace()
    except ValueError as exc:
        raise ExportError(str(exc)) from None
    return doc


# -- timeline --------------------------------------------------------------------


def timeline(result: SimResult) -> str:
    """One row per event instance: start, end, name, group marker.

    Members of one parallel group share their marker; gaps are noted after
    the marker rather than drawn.
    """
    doc = trace_to_document(result)
    header = f"# schema={result.schema_name or '-'} scenario={result.scenario_name or '-'} terminated={result.terminated} ticks={result.ticks}"
    rows = [("START", "END", "EVENT", "GROUP", "")]
    for e in doc.events:
        gaps = ""
        if e["gaps"]:
            gaps = "gaps " + ", ".join(f"{a}-{b}" for a, b in e["gaps"])
        rows.append((str(e["start"]), str(e["end"]), e["name"], f"g{e['group']}", gaps))
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    lines = [header]
    for r in rows:
        line = f"{r[0]:>{widths[0]}}  {r[1]:>{widths[1]}}  {r[2]:<{widths[2]}}  {r[3]:<{widths[3]}}"
        if r[4]:
            line += f"  {r[4]}"
        lines.append(line.rstrip())
    return "\n".join(lines) + "\n"
