"""Typed, addressable graph of a flowthing schema.

A schema is a forest of spheres. Spheres hold subspheres and machines;
machines are leaves and own a set of stages. Flow arcs (solid) and trigger
arcs (dashed) connect stages. Every element is addressed by a dotted path
such as ``Station.Car.transfer``.

Construction checks only what would make the graph unaddressable (dangling
arc endpoints, duplicate stages inside one machine). Everything else is the
validator's job, so that a schema with rule violations can still be built
and reported on.
"""

from __future__ import annotations

import enum
import hashlib
import re
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Iterator, Union

if TYPE_CHECKING:
    from .events import EventDef

IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*(?:-[A-Za-z0-9_]+)*\Z")


class ModelError(ValueError):
    """A schema element could not be constructed.

    ``rule`` is the validator rule the violation belongs to, when there is one.
    """

    def __init__(self, message: str, rule: str | None = None, subject: str = "") -> None:
        super().__init__(message)
        self.rule = rule
        self.subject = subject


class NotFound(LookupError):
    pass


class Ambiguous(LookupError):
    pass


class StageKind(enum.Enum):
    CREATE = "create"
    RELEASE = "release"
    TRANSFER = "transfer"
    RECEIVE = "receive"
    ARRIVE = "arrive"
    ACCEPT = "accept"
    PROCESS = "process"

    @property
    def order(self) -> int:
        return _KIND_ORDER[self]

    @classmethod
    def parse(cls, name: str) -> StageKind:
        try:
            return cls(name.lower())
        except ValueError:
            raise NotFound(f"unknown stage kind {name!r}") from None


# Canonical listing order, following the direction of flow.
_CANONICAL = (
    StageKind.CREATE,
    StageKind.ARRIVE,
    StageKind.ACCEPT,
    StageKind.RECEIVE,
    StageKind.PROCESS,
    StageKind.RELEASE,
    StageKind.TRANSFER,
)
_KIND_ORDER = {kind: i for i, kind in enumerate(_CANONICAL)}


def canonical_kinds() -> tuple[StageKind, ...]:
    return _CANONICAL


def _check_ident(name: str, what: str) -> None:
    if not isinstance(name, str) or not IDENT_RE.match(name):
        raise ModelError(f"invalid {what} name {name!r}")


@dataclass(frozen=True)
class Machine:
    """A leaf of the sphere tree through which one kind of thing flows."""

    thing: str
    stages: tuple[StageKind, ...] = ()
    has_storage: bool = False
    storage_links: tuple[StageKind, ...] = ()

    def __post_init__(self) -> None:
        _check_ident(self.thing, "machine")
        stages = tuple(self.stages)
        seen: set[StageKind] = set()
        for kind in stages:
            if kind in seen:
                raise ModelError(
                    f"stage {kind.value!r} declared twice in machine {self.thing!r}",
                    rule="V-EXCL",
                    subject=self.thing,
                )
            seen.add(kind)
        links = tuple(self.storage_links)
        if len(set(links)) != len(links):
            raise ModelError(f"duplicate storage link in machine {self.thing!r}", subject=self.thing)
        if links and not self.has_storage:
            raise ModelError(
                f"machine {self.thing!r} links stages to storage but has no storage",
                subject=self.thing,
            )
        for kind in links:
            if kind not in seen:
                raise ModelError(
                    f"storage link to undeclared stage {kind.value!r} in machine {self.thing!r}",
                    subject=self.thing,
                )
        object.__setattr__(self, "stages", tuple(sorted(stages, key=_KIND_ORDER.__getitem__)))
        object.__setattr__(self, "storage_links", tuple(sorted(links, key=_KIND_ORDER.__getitem__)))

    def has(self, kind: StageKind) -> bool:
        return kind in self.stages


@dataclass(frozen=True)
class Sphere:
    name: str
    subspheres: tuple[Sphere, ...] = ()
    machines: tuple[Machine, ...] = ()

    def __post_init__(self) -> None:
        _check_ident(self.name, "sphere")
        object.__setattr__(self, "subspheres", tuple(self.subspheres))
        object.__setattr__(self, "machines", tuple(self.machines))

    def child(self, name: str) -> Sphere | Machine | None:
        for sub in self.subspheres:
            if sub.name == name:
                return sub
        for machine in self.machines:
            if machine.thing == name:
                return machine
        return None


def _dotted(parts: Iterable[str]) -> str:
    return ".".join(parts)


@dataclass(frozen=True, order=True)
class SphereRef:
    sphere_path: tuple[str, ...]

    @property
    def path(self) -> str:
        return _dotted(self.sphere_path)

    def __str__(self) -> str:
        return self.path


@dataclass(frozen=True, order=True)
class MachineRef:
    sphere_path: tuple[str, ...]
    machine: str

    @property
    def path(self) -> str:
        return _dotted((*self.sphere_path, self.machine))

    def stage(self, kind: StageKind) -> StageRef:
        return StageRef(self.sphere_path, self.machine, kind)

    def __str__(self) -> str:
        return self.path


@dataclass(frozen=True)
class StageRef:
    sphere_path: tuple[str, ...]
    machine: str
    stage: StageKind

    def __post_init__(self) -> None:
        object.__setattr__(self, "sphere_path", tuple(self.sphere_path))

    @property
    def path(self) -> str:
        return _dotted((*self.sphere_path, self.machine, self.stage.value))

    @property
    def machine_ref(self) -> MachineRef:
        return MachineRef(self.sphere_path, self.machine)

    def sort_key(self) -> tuple:
        return (self.sphere_path, self.machine, self.stage.order)

    def __lt__(self, other: StageRef) -> bool:
        return self.sort_key() < other.sort_key()

    def __str__(self) -> str:
        return self.path


@dataclass(frozen=True)
class FlowArc:
    source: StageRef
    target: StageRef
    declaration_index: int = 0

    def __post_init__(self) -> None:
        if self.source == self.target:
            raise ModelError(f"flow from {self.source} to itself", rule="V-FLOW", subject=str(self.source))
        if self.declaration_index < 0:
            raise ModelError("declaration_index must be >= 0")

    @property
    def intra_machine(self) -> bool:
        return self.source.machine_ref == self.target.machine_ref

    def sort_key(self) -> tuple:
        return (self.source.sort_key(), self.target.sort_key(), self.declaration_index)

    def __str__(self) -> str:
        return f"{self.source} -> {self.target}"


@dataclass(frozen=True)
class TriggerArc:
    source: Union[StageRef, FlowArc]
    target: StageRef
    declaration_index: int = 0

    def __str__(self) -> str:
        if isinstance(self.source, FlowArc):
            return f"({self.source}) ~> {self.target}"
        return f"{self.source} ~> {self.target}"


Ref = Union[SphereRef, MachineRef, StageRef]
RegionItem = Union[StageRef, FlowArc]


def region_sort_key(item: RegionItem) -> tuple:
    if isinstance(item, StageRef):
        return (0, item.sort_key())
    return (1, item.sort_key())


@dataclass(frozen=True)
class Schema:
    """A static flowthing description.

    ``name`` is informational (usually the file stem) and is not part of
    structural equality.
    """

    spheres: tuple[Sphere, ...] = ()
    flows: tuple[FlowArc, ...] = ()
    triggers: tuple[TriggerArc, ...] = ()
    events: tuple[EventDef, ...] = ()
    declared_traces: tuple[tuple[str, tuple[str, ...]], ...] = ()
    name: str = field(default="", compare=False)

    _machines: dict = field(init=False, repr=False, compare=False)
    _spheres: dict = field(init=False, repr=False, compare=False)
    _outgoing: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "spheres", tuple(self.spheres))
        object.__setattr__(self, "flows", tuple(self.flows))
        object.__setattr__(self, "triggers", tuple(self.triggers))
        object.__setattr__(self, "events", tuple(self.events))
        object.__setattr__(
            self,
            "declared_traces",
            tuple((name, tuple(seq)) for name, seq in self.declared_traces),
        )

        spheres: dict[tuple[str, ...], Sphere] = {}
        machines: dict[tuple[tuple[str, ...], str], Machine] = {}
        for path, sphere in _walk(self.spheres, ()):
            spheres.setdefault(path, sphere)
            for machine in sphere.machines:
                machines.setdefault((path, machine.thing), machine)
        object.__setattr__(self, "_spheres", spheres)
        object.__setattr__(self, "_machines", machines)

        outgoing: dict[StageRef, list[FlowArc]] = {}
        for arc in self.flows:
            for end in (arc.source, arc.target):
                if not self.has_stage(end):
                    raise ModelError(f"flow endpoint {end} does not resolve", rule="V-FLOW", subject=str(arc))
            outgoing.setdefault(arc.source, []).append(arc)
        for arcs in outgoing.values():
            arcs.sort(key=lambda a: a.declaration_index)
        object.__setattr__(self, "_outgoing", {k: tuple(v) for k, v in outgoing.items()})

        flow_set = set(self.flows)
        for trig in self.triggers:
            if not self.has_stage(trig.target):
                raise ModelError(f"trigger target {trig.target} does not resolve", rule="V-TRIG", subject=str(trig))
            if isinstance(trig.source, FlowArc):
                if trig.source not in flow_set:
                    raise ModelError(f"trigger source flow {trig.source} is not declared", rule="V-TRIG", subject=str(trig))
            elif not self.has_stage(trig.source):
                raise ModelError(f"trigger source {trig.source} does not resolve", rule="V-TRIG", subject=str(trig))

    # -- lookup -----------------------------------------------------------

    def machine(self, ref: MachineRef) -> Machine | None:
        return self._machines.get((ref.sphere_path, ref.machine))

    def sphere(self, ref: SphereRef) -> Sphere | None:
        return self._spheres.get(ref.sphere_path)

    def has_stage(self, ref: StageRef) -> bool:
        machine = self._machines.get((ref.sphere_path, ref.machine))
        return machine is not None and machine.has(ref.stage)

    def event(self, name: str) -> EventDef | None:
        for ev in self.events:
            if ev.name == name:
                return ev
        return None

    def trace_names(self, name: str) -> tuple[str, ...] | None:
        for trace_name, seq in self.declared_traces:
            if trace_name == name:
                return seq
        return None

    def iter_machines(self) -> Iterator[MachineRef]:
        """Machines in declaration order, depth first."""
        for path, sphere in _walk(self.spheres, ()):
            for machine in sphere.machines:
                yield MachineRef(path, machine.thing)

    def iter_stages(self) -> Iterator[StageRef]:
        for mref in self.iter_machines():
            for kind in self._machines[(mref.sphere_path, mref.machine)].stages:
                yield mref.stage(kind)

    def stage_order(self) -> dict[StageRef, int]:
        return {ref: i for i, ref in enumerate(self.iter_stages())}

    def fingerprint(self) -> str:
        """Digest of the static diagram (spheres, flows, triggers).

        Events defined against schemas with equal fingerprints are comparable.
        """
        h = hashlib.sha256()
        for path, sphere in _walk(self.spheres, ()):
            h.update(f"S{'.'.join(path)}\n".encode())
            for m in sphere.machines:
                stages = ",".join(k.value for k in m.stages)
                links = ",".join(k.value for k in m.storage_links)
                h.update(f"M{m.thing}|{stages}|{int(m.has_storage)}|{links}\n".encode())
        for arc in self.flows:
            h.update(f"F{arc.declaration_index}:{arc}\n".encode())
        for trig in self.triggers:
            h.update(f"T{trig.declaration_index}:{trig}\n".encode())
        return h.hexdigest()[:16]


def _walk(spheres: Iterable[Sphere], prefix: tuple[str, ...]) -> Iterator[tuple[tuple[str, ...], Sphere]]:
    for sphere in spheres:
        path = (*prefix, sphere.name)
        yield path, sphere
        yield from _walk(sphere.subspheres, path)


def walk_spheres(schema: Schema) -> Iterator[tuple[tuple[str, ...], Sphere]]:
    return _walk(schema.spheres, ())


# -- operations -------------------------------------------------------------


def split_path(path: str) -> list[str]:
    if not isinstance(path, str) or not path:
        raise NotFound(f"empty path")
    parts = path.split(".")
    for part in parts:
        if not IDENT_RE.match(part):
            raise NotFound(f"malformed path {path!r}")
    return parts


def resolve(schema: Schema, path: str) -> Ref:
    """Resolve a dotted path to the sphere, machine or stage it names."""
    parts = split_path(path)
    level: Iterable[Sphere] = schema.spheres
    current: Sphere | None = None
    sphere_path: list[str] = []
    i = 0
    while i < len(parts):
        matches = [s for s in level if s.name == parts[i]]
        if len(matches) > 1:
            raise Ambiguous(f"internal error: sphere {'.'.join(parts[: i + 1])} is declared twice")
        if not matches:
            break
        current = matches[0]
        sphere_path.append(parts[i])
        level = current.subspheres
        i += 1
    if current is None:
        raise NotFound(f"no sphere named {parts[0]!r}")
    if i == len(parts):
        return SphereRef(tuple(sphere_path))
    machines = [m for m in current.machines if m.thing == parts[i]]
    if len(machines) > 1:
        raise Ambiguous(f"internal error: machine {'.'.join(parts[: i + 1])} is declared twice")
    if not machines:
        raise NotFound(f"{'.'.join(sphere_path)} has no sphere or machine named {parts[i]!r}")
    machine = machines[0]
    mref = MachineRef(tuple(sphere_path), machine.thing)
    i += 1
    if i == len(parts):
        return mref
    if i != len(parts) - 1:
        raise NotFound(f"{path!r}: a machine has no subspheres")
    try:
        kind = StageKind.parse(parts[i])
    except NotFound:
        raise NotFound(f"{path!r}: {parts[i]!r} is not a stage kind") from None
    if not machine.has(kind):
        raise NotFound(f"machine {mref} has no {kind.value} stage")
    return mref.stage(kind)


def resolve_stage(schema: Schema, path: str) -> StageRef:
    ref = resolve(schema, path)
    if not isinstance(ref, StageRef):
        raise NotFound(f"{path!r} names a {type(ref).__name__[:-3].lower()}, not a stage")
    return ref


def outgoing(schema: Schema, at: StageRef) -> tuple[FlowArc, ...]:
    """Flow arcs leaving ``at`` in declaration order."""
    if not schema.has_stage(at):
        raise NotFound(f"stage {at} does not resolve")
    return schema._outgoing.get(at, ())


def _expand(schema: Schema, ref, stages: set[StageRef]) -> None:
    if isinstance(ref, StageRef):
        if not schema.has_stage(ref):
            raise NotFound(f"stage {ref} does not resolve")
        stages.add(ref)
    elif isinstance(ref, FlowArc):
        if ref not in schema.flows:
            raise NotFound(f"flow {ref} is not declared")
        stages.add(ref.source)
        stages.add(ref.target)
    elif isinstance(ref, MachineRef):
        machine = schema.machine(ref)
        if machine is None:
            raise NotFound(f"machine {ref} does not resolve")
        stages.update(ref.stage(k) for k in machine.stages)
    elif isinstance(ref, SphereRef):
        sphere = schema.sphere(ref)
        if sphere is None:
            raise NotFound(f"sphere {ref} does not resolve")
        for path, sub in _walk([sphere], ref.sphere_path[:-1]):
            for machine in sub.machines:
                mref = MachineRef(path, machine.thing)
                stages.update(mref.stage(k) for k in machine.stages)
    else:
        raise TypeError(f"cannot take the region of {ref!r}")


def region_closure(schema: Schema, refs: Iterable) -> frozenset[RegionItem]:
    """Expand refs to the stages they cover plus every flow between them.

    Flow arcs given directly contribute their endpoints, which makes the
    closure idempotent.
    """
    stages: set[StageRef] = set()
    for ref in refs:
        _expand(schema, ref, stages)
    arcs = {arc for arc in schema.flows if arc.source in stages and arc.target in stages}
    return frozenset(stages) | frozenset(arcs)


def region_stages(region: Iterable[RegionItem]) -> list[StageRef]:
    return sorted(item for item in region if isinstance(item, StageRef))
