"""Events over schema regions and the algebra of their traces."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import groupby
from typing import Iterable, Sequence

from .model import (
    FlowArc,
    ModelError,
    NotFound,
    RegionItem,
    Schema,
    StageRef,
    region_closure,
    region_sort_key,
)


class EventError(ValueError):
    pass


class EmptyRegion(EventError):
    pass


class DuplicateName(EventError):
    pass


class SchemaMismatch(EventError):
    pass


class EmptyTrace(EventError):
    pass


@dataclass(frozen=True)
class EventDef:
    """A named region of a schema: "a thing with its machine".

    ``schema_key`` is the fingerprint of the schema the region was closed
    against; events are only comparable when their keys agree.
    """

    name: str
    region: frozenset
    label: str = ""
    duration: int = 1
    property_labels: frozenset = frozenset()
    schema_key: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "region", frozenset(self.region))
        object.__setattr__(self, "property_labels", frozenset(self.property_labels))
        if not self.region:
            raise EmptyRegion(f"event {self.name!r} has an empty region")
        if not isinstance(self.duration, int) or self.duration < 1:
            raise EventError(f"event {self.name!r}: duration must be an integer >= 1")
        for item in self.region:
            if not isinstance(item, (StageRef, FlowArc)):
                raise EventError(f"event {self.name!r}: region items must be stages or flows, got {item!r}")

    @property
    def stages(self) -> frozenset[StageRef]:
        return frozenset(i for i in self.region if isinstance(i, StageRef))

    def sorted_region(self) -> list[RegionItem]:
        return sorted(self.region, key=region_sort_key)


def define_event(
    schema: Schema,
    name: str,
    refs: Iterable,
    duration: int = 1,
    *,
    label: str = "",
    properties: Iterable[str] = (),
) -> EventDef:
    if schema.event(name) is not None:
        raise DuplicateName(f"event {name!r} is already defined")
    refs = list(refs)
    if not refs:
        raise EmptyRegion(f"event {name!r} has an empty region")
    region = region_closure(schema, refs)
    return EventDef(
        name=name,
        region=region,
        label=label,
        duration=duration,
        property_labels=frozenset(properties),
        schema_key=schema.fingerprint(),
    )


def _same_schema(*events: EventDef) -> None:
    keys = {ev.schema_key for ev in events}
    if len(keys) > 1:
        names = ", ".join(ev.name for ev in events)
        raise SchemaMismatch(f"events {names} were defined against different schemas")


def contains(outer: EventDef, inner: EventDef) -> bool:
    _same_schema(outer, inner)
    return inner.region <= outer.region


def implies(a: EventDef, b: EventDef) -> bool:
    """Whether ``a`` occurring entails ``b`` occurring.

    This is region containment and nothing more. A false answer says nothing
    about non-occurrence: ``b`` failing to occur need not mean ``a`` did not,
    since some alternative sharing part of ``a``'s region may have occurred.
    """
    return contains(a, b)


def compose(schema: Schema, name: str, parts: Sequence[EventDef], *, label: str = "") -> EventDef:
    if not parts:
        raise EventError(f"cannot compose {name!r} from no parts")
    _same_schema(*parts)
    key = schema.fingerprint()
    if parts[0].schema_key and parts[0].schema_key != key:
        raise SchemaMismatch(f"parts of {name!r} were not defined against this schema")
    union: set = set()
    for part in parts:
        union |= part.region
    return EventDef(
        name=name,
        region=region_closure(schema, union),
        label=label,
        duration=max(p.duration for p in parts),
        property_labels=frozenset().union(*(p.property_labels for p in parts)),
        schema_key=key,
    )


# -- traces -----------------------------------------------------------------


@dataclass(frozen=True)
class EventInstance:
    event: str
    start: int
    end: int
    gaps: tuple[tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "gaps", tuple((int(a), int(b)) for a, b in self.gaps))
        if self.start > self.end:
            raise EventError(f"instance of {self.event!r} ends before it starts")
        prev = self.start
        for lo, hi in self.gaps:
            if not (prev < lo < hi < self.end):
                raise EventError(f"instance of {self.event!r} has a gap outside its span or out of order")
            prev = hi


@dataclass(frozen=True)
class Trace:
    """Event instances grouped by start tick.

    Groups are in strictly increasing start order; members of a group are
    parallel and keep the order they were given in.
    """

    groups: tuple[tuple[EventInstance, ...], ...] = ()
    _names: tuple[tuple[str, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        groups = tuple(tuple(g) for g in self.groups)
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "_names", tuple(tuple(inst.event for inst in g) for g in groups))
        last = None
        for group in groups:
            if not group:
                raise EventError("trace groups must be nonempty")
            starts = {inst.start for inst in group}
            if len(starts) != 1:
                raise EventError("instances in one group must share a start tick")
            (start,) = starts
            if last is not None and start <= last:
                raise EventError("trace groups must have strictly increasing start ticks")
            last = start

    @classmethod
    def from_instances(cls, instances: Iterable[EventInstance]) -> Trace:
        ordered = sorted(instances, key=lambda inst: inst.start)
        return cls(tuple(tuple(g) for _, g in groupby(ordered, key=lambda inst: inst.start)))

    @classmethod
    def sequential(cls, names: Iterable[str]) -> Trace:
        """One instance per name, each a tick after the last."""
        return cls(tuple((EventInstance(name, i, i + 1),) for i, name in enumerate(names)))

    @property
    def instances(self) -> list[EventInstance]:
        return [inst for group in self.groups for inst in group]

    def flatten(self) -> list[tuple[str, int]]:
        return [(inst.event, g) for g, group in enumerate(self.groups) for inst in group]

    def names(self) -> list[str]:
        return [inst.event for inst in self.instances]

    def __len__(self) -> int:
        return sum(len(g) for g in self.groups)


def subtrace(candidate: Trace, reference: Trace) -> bool:
    """Whether ``candidate`` embeds in ``reference``.

    The flattened name sequences must embed in order, and instances that are
    parallel in the candidate must land in one parallel group of the
    reference. Each candidate group is placed as early as possible; since
    whether the rest fits only depends on how far into the reference we are,
    the earliest placement is never worse than any other.
    """
    ref_groups = reference._names
    gi = 0  # reference group
    pos = 0  # next usable position inside ref_groups[gi]
    for names in candidate._names:
        while gi < len(ref_groups):
            end = _embed(names, ref_groups[gi], pos)
            if end is not None:
                pos = end
                break
            gi += 1
            pos = 0
        else:
            return False
    return True


def _embed(needle: tuple[str, ...], hay: tuple[str, ...], start: int) -> int | None:
    j = start
    for name in needle:
        while j < len(hay) and hay[j] != name:
            j += 1
        if j == len(hay):
            return None
        j += 1
    return j


def trace_time(t: Trace) -> int:
    instances = t.instances
    if not instances:
        raise EmptyTrace("trace time of an empty trace is undefined")
    return max(i.end for i in instances) - min(i.start for i in instances)


def parallel_groups(t: Trace) -> list[tuple[int, frozenset[str]]]:
    return [(group[0].start, frozenset(inst.event for inst in group)) for group in t.groups]


def trace_as_event(schema: Schema, name: str, t: Trace) -> EventDef:
    """Wrap a trace as one event over the union of its events' regions."""
    parts = []
    for event_name in dict.fromkeys(t.names()):
        ev = schema.event(event_name)
        if ev is None:
            raise NotFound(f"trace mentions undefined event {event_name!r}")
        parts.append(ev)
    return compose(schema, name, parts)


def check_region(schema: Schema, ev: EventDef) -> None:
    """Raise if ``ev``'s region does not resolve or is not closed."""
    try:
        closed = region_closure(schema, ev.region)
    except NotFound as exc:
        raise ModelError(str(exc), rule="V-REGION", subject=ev.name) from None
    if closed != ev.region:
        raise ModelError(f"region of event {ev.name!r} is not closed under flows", rule="V-REGION", subject=ev.name)
