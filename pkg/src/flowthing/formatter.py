"""Canonical text for schemas and scenarios: LF endings, 2-space indent.

An empty schema formats to the empty string. Comments are not part of the
model; :func:`split_comments` recovers the leading comment block so callers
can keep it as a header.
"""

from __future__ import annotations

from .model import FlowArc, Machine, Schema, Sphere, StageRef
from .scenario import Scenario
from .syntax import decode, tokenize

INDENT = "  "


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _machine(machine: Machine, depth: int) -> list[str]:
    pad = INDENT * depth
    body = []
    if machine.stages:
        body.append(f"{pad}{INDENT}stages: " + ", ".join(k.value for k in machine.stages))
    if machine.has_storage:
        links = ", ".join(k.value for k in machine.storage_links)
        body.append(f"{pad}{INDENT}storage" + (f": {links}" if links else ""))
    if not body:
        return [f"{pad}machine {machine.thing} {{}}"]
    return [f"{pad}machine {machine.thing} {{", *body, f"{pad}}}"]


def _sphere(sphere: Sphere, depth: int) -> list[str]:
    pad = INDENT * depth
    if not sphere.subspheres and not sphere.machines:
        return [f"{pad}sphere {sphere.name} {{}}"]
    lines = [f"{pad}sphere {sphere.name} {{"]
    for machine in sphere.machines:
        lines.extend(_machine(machine, depth + 1))
    for sub in sphere.subspheres:
        lines.extend(_sphere(sub, depth + 1))
    lines.append(f"{pad}}}")
    return lines


def split_comments(source: str | bytes) -> tuple[str, int]:
    """(header, dropped): the comment lines before the first token, and how
    many comments come later and would be lost by reformatting."""
    comments: list[tuple[int, str]] = []
    text = decode(source, "<string>", [])
    tokens = tokenize(text, "<string>", [], comments)
    first = tokens[0].span.line if tokens[0].kind != "EOF" else None
    head = [c for line, c in comments if first is None or line < first]
    return "".join(c + "\n" for c in head), len(comments) - len(head)


def with_header(header: str, body: str) -> str:
    if not header:
        return body
    return header + ("\n" + body if body else "")


def format_schema(schema: Schema) -> str:
    blocks: list[list[str]] = []
    for sphere in schema.spheres:
        blocks.append(_sphere(sphere, 0))
    if schema.flows:
        blocks.append([f"flow {arc.source} -> {arc.target}" for arc in schema.flows])
    if schema.triggers:
        lines = []
        for trig in schema.triggers:
            if isinstance(trig.source, FlowArc):
                lines.append(f"trigger ({trig.source.source} -> {trig.source.target}) ~> {trig.target}")
            else:
                lines.append(f"trigger {trig.source} ~> {trig.target}")
        blocks.append(lines)
    order = schema.stage_order()
    for ev in schema.events:
        head = f"event {ev.name}" + (f" {_quote(ev.label)}" if ev.label else "") + " {"
        stages = sorted(
            (item for item in ev.region if isinstance(item, StageRef)),
            key=lambda ref: order.get(ref, len(order)),
        )
        lines = [head, f"{INDENT}region: " + ", ".join(str(s) for s in stages)]
        if ev.duration != 1:
            lines.append(f"{INDENT}duration {ev.duration}")
        if ev.property_labels:
            lines.append(f"{INDENT}properties: " + ", ".join(sorted(ev.property_labels)))
        lines.append("}")
        blocks.append(lines)
    if schema.declared_traces:
        blocks.append([f"trace {name}: " + ", ".join(seq) for name, seq in schema.declared_traces])
    if not blocks:
        return ""
    return "\n\n".join("\n".join(block) for block in blocks) + "\n"


def format_scenario(scenario: Scenario) -> str:
    lines = [f"inject {path} @ {tick}" for path, tick in scenario.injections]
    tm = scenario.time_machine
    if tm is not None:
        lines.append(f"time_machine period {tm.period} count {tm.slice_count} -> " + ", ".join(tm.targets))
    lines.append(f"max_ticks {scenario.max_ticks}")
    return "\n".join(lines) + "\n"
