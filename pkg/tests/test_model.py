import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowthing.model import (
    FlowArc,
    Machine,
    MachineRef,
    ModelError,
    NotFound,
    Schema,
    Sphere,
    SphereRef,
    StageKind,
    StageRef,
    TriggerArc,
    canonical_kinds,
    outgoing,
    region_closure,
    resolve,
)

from conftest import corpus

K = StageKind


def ref(path, machine, kind):
    return StageRef(tuple(path.split(".")), machine, kind)


def test_seven_kinds_and_no_storage():
    assert len(StageKind) == 7
    assert len(canonical_kinds()) == 7
    assert "storage" not in {k.value for k in StageKind}
    with pytest.raises(NotFound):
        StageKind.parse("storage")


def test_resolve_stage_sphere_and_missing():
    s = corpus("robots.fm")
    assert resolve(s, "Station.Car.transfer") == ref("Station", "Car", K.TRANSFER)
    assert resolve(s, "Station") == SphereRef(("Station",))
    assert resolve(s, "Station.Car") == MachineRef(("Station",), "Car")
    with pytest.raises(NotFound):
        resolve(s, "Station.Bus")
    with pytest.raises(NotFound):
        resolve(s, "Station.Car.accept")


def test_resolve_nested_sphere_and_repeat_calls_agree():
    s = corpus("hydepark.fm")
    first = resolve(s, "Hyde-Park.Bench.John.process")
    assert first == ref("Hyde-Park.Bench", "John", K.PROCESS)
    assert all(resolve(s, "Hyde-Park.Bench.John.process") == first for _ in range(5))


@pytest.mark.parametrize("bad", ["", ".", "A..B", "A.1x", "A B"])
def test_resolve_malformed(bad):
    with pytest.raises(NotFound):
        resolve(corpus("robots.fm"), bad)


def test_outgoing_from_park_transfer():
    s = corpus("hydepark.fm")
    arcs = outgoing(s, ref("Hyde-Park", "John", K.TRANSFER))
    assert [a.target for a in arcs] == [ref("Hyde-Park.Bench", "John", K.RECEIVE)]
    assert outgoing(s, ref("Outside", "John", K.RECEIVE)) == ()


def test_outgoing_keeps_declaration_order():
    a = Machine("T", (K.CREATE, K.RELEASE, K.PROCESS))
    s = Sphere("S", (), (a,))
    create, release, process = (ref("S", "T", k) for k in (K.CREATE, K.RELEASE, K.PROCESS))
    schema = Schema((s,), (FlowArc(create, release, 0), FlowArc(create, process, 1)))
    assert [arc.target for arc in outgoing(schema, create)] == [release, process]
    schema = Schema((s,), (FlowArc(create, process, 0), FlowArc(create, release, 1)))
    assert [arc.target for arc in outgoing(schema, create)] == [process, release]
    with pytest.raises(NotFound):
        outgoing(schema, ref("S", "T", K.TRANSFER))


def test_machine_invariants():
    with pytest.raises(ModelError) as exc:
        Machine("T", (K.PROCESS, K.PROCESS))
    assert exc.value.rule == "V-EXCL"
    with pytest.raises(ModelError):
        Machine("T", (K.PROCESS,), has_storage=False, storage_links=(K.PROCESS,))
    with pytest.raises(ModelError):
        Machine("T", (K.PROCESS,), has_storage=True, storage_links=(K.CREATE,))
    m = Machine("T", (K.PROCESS, K.CREATE), has_storage=True, storage_links=(K.PROCESS,))
    assert m.stages == (K.CREATE, K.PROCESS)


def test_arc_invariants():
    x = ref("S", "T", K.CREATE)
    with pytest.raises(ModelError):
        FlowArc(x, x, 0)
    s = Sphere("S", (), (Machine("T", (K.CREATE,)),))
    with pytest.raises(ModelError):
        Schema((s,), (FlowArc(x, ref("S", "T", K.PROCESS), 0),))
    with pytest.raises(ModelError):
        Schema((s,), (), (TriggerArc(x, ref("S", "U", K.CREATE), 0),))


def test_closure_of_machine_hand_enumerated():
    s = corpus("hydepark.fm")
    got = region_closure(s, [MachineRef(("Hyde-Park",), "John")])
    kinds = (K.RECEIVE, K.PROCESS, K.RELEASE, K.TRANSFER)
    stages = {ref("Hyde-Park", "John", k) for k in kinds}
    arcs = {FlowArc(a, b, 0) for a, b in zip(sorted(stages), sorted(stages)[1:])}
    assert {x for x in got if isinstance(x, StageRef)} == stages
    pairs = {(a.source, a.target) for a in got if isinstance(a, FlowArc)}
    assert pairs == {(a.source, a.target) for a in arcs}


def test_closure_edge_cases():
    s = corpus("hydepark.fm")
    assert region_closure(s, []) == frozenset()
    lone = ref("Outside", "John", K.RECEIVE)
    assert region_closure(s, [lone]) == {lone}
    with pytest.raises(NotFound):
        region_closure(s, [ref("Nowhere", "John", K.RECEIVE)])


def test_closure_of_sphere_includes_subspheres():
    s = corpus("hydepark.fm")
    got = region_closure(s, [SphereRef(("Hyde-Park",))])
    assert ref("Hyde-Park.Walkway", "John", K.TRANSFER) in got
    assert ref("Outside", "John", K.RECEIVE) not in got


def test_fingerprint_ignores_events_and_name():
    a = corpus("lewis.fm")
    b = Schema(a.spheres, a.flows, a.triggers, (), (), name="other")
    assert a.fingerprint() == b.fingerprint()
    c = Schema(a.spheres, a.flows[:-1], a.triggers)
    assert a.fingerprint() != c.fingerprint()


HYDE = corpus("hydepark.fm")
ITEMS = sorted(HYDE.iter_stages()) + list(HYDE.flows)
subsets = st.sets(st.sampled_from(ITEMS), max_size=8)


@settings(max_examples=200, deadline=None)
@given(subsets)
def test_closure_idempotent(r):
    once = region_closure(HYDE, r)
    assert region_closure(HYDE, once) == once


@settings(max_examples=200, deadline=None)
@given(subsets, subsets)
def test_closure_monotone(r1, r2):
    assert region_closure(HYDE, r1) <= region_closure(HYDE, r1 | r2)
