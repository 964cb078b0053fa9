import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowthing.events import parallel_groups, subtrace, trace_time
from flowthing.model import StageKind, StageRef
from flowthing.parser import parse_scenario, parse_schema
from flowthing.scenario import Scenario, TimeMachine
from flowthing.simulator import (
    MAX_TICKS,
    MAX_TICKS_WARNING,
    QUIESCENCE,
    SimState,
    UnresolvedScenarioRef,
    ValidationFailed,
    run_steps,
    simulate,
    step,
    time_machine_slices,
)

from conftest import SCENARIOS, corpus, scenario

K = StageKind

LOOP = parse_schema(
    """
    sphere A { machine T { stages: receive, process, release, transfer } }
    sphere B { machine T { stages: receive, release, transfer } }
    flow A.T.receive -> A.T.process
    flow A.T.process -> A.T.release
    flow A.T.release -> A.T.transfer
    flow A.T.transfer -> B.T.receive
    flow B.T.receive -> B.T.release
    flow B.T.release -> B.T.transfer
    flow B.T.transfer -> A.T.receive
    event InA { region: A.T }
    """
)


def run(scenario_name):
    return simulate(corpus(SCENARIOS[scenario_name]), scenario(scenario_name))


@pytest.mark.parametrize("period, count, ticks", [(1, 3, [0, 1, 2]), (5, 1, [0]), (2, 3, [0, 2, 4])])
def test_time_machine_slices(period, count, ticks):
    assert time_machine_slices(period, count) == ticks


def test_time_machine_slices_rejects_bad_config():
    with pytest.raises(ValueError):
        time_machine_slices(0, 3)


def test_empty_scenario_quiesces_at_zero():
    r = simulate(corpus("needle.fm"), Scenario(max_ticks=5))
    assert r.trace.groups == () and r.terminated == QUIESCENCE and r.ticks == 0 and r.log == ()


def test_needle_series():
    r = run("needle.fms")
    insts = r.trace.instances
    assert [(i.event, i.start, i.end) for i in insts] == [("NeedleEvent", t, t + 1) for t in range(3)]
    needle_create = StageRef(("Cleopatras-Needle",), "Needle", K.CREATE)
    creates = [e for e in r.log if e.at == needle_create]
    assert [e.tick for e in creates] == [1, 2, 3]
    assert len({e.token for e in creates}) == 3
    assert r.terminated == QUIESCENCE


def test_robots_receive_in_parallel_after_station():
    r = run("robots.fms")
    station = StageRef(("Station",), "Car", K.RECEIVE)
    (receipt,) = [e.tick for e in r.log if e.at == station]
    groups = dict(parallel_groups(r.trace))
    assert {"Robot1-Receive", "Robot2-Receive"} <= groups[receipt + 1]


def test_ball_heat_and_rotation_share_a_group():
    groups = [names for _, names in parallel_groups(run("ball.fms").trace)]
    assert any({"Event2", "Event3"} <= g for g in groups)


def test_professor_runs():
    nd, wd = run("professor-nodelay.fms"), run("professor-delay.fms")
    assert nd.trace.names() == ["V1", "V3", "V4", "V5", "V6"]
    assert wd.trace.names() == ["V1", "V2", "V1", "V3", "V4", "V5", "V6"]
    assert subtrace(nd.trace, wd.trace)
    assert trace_time(nd.trace) < trace_time(wd.trace)


def test_phoebe_processes_the_past_later():
    r = run("phoebe.fms")
    talked = [i for i in r.trace.instances if i.event == "TalkedAbout"]
    assert len(talked) == 1 and talked[0].start == 15
    fed = [i for i in r.trace.instances if i.event == "Fed"]
    assert fed and fed[0].start < talked[0].start


def test_gap_inside_one_instance():
    r = simulate(LOOP, parse_scenario("inject A.T.receive @ 0; max_ticks 10"))
    (inst,) = r.trace.instances
    assert (inst.start, inst.end, inst.gaps) == (0, 10, ((4, 7),))
    assert r.terminated == MAX_TICKS and r.warnings == (MAX_TICKS_WARNING,)


def test_step_on_idle_state():
    s = corpus("needle.fm")
    before = SimState(clock=4)
    after = step(s, before, Scenario(max_ticks=10))
    assert after == SimState(clock=5)


def test_step_with_one_injection():
    s = corpus("robots.fm")
    sc = parse_scenario("inject Station.Car.transfer @ 0; max_ticks 5")
    after = step(s, SimState(), sc)
    assert after.clock == 1 and len(after.tokens) == 1 and after.next_id == 1
    (tok,) = after.tokens
    assert tok.at == StageRef(("Station",), "Car", K.TRANSFER) and tok.created_at == 0


@pytest.mark.parametrize("name", sorted(SCENARIOS))
def test_steps_match_simulate(name):
    schema, sc = corpus(SCENARIOS[name]), scenario(name)
    assert run_steps(schema, sc, sc.max_ticks).log == simulate(schema, sc).log


@pytest.mark.parametrize("name", sorted(SCENARIOS))
def test_deterministic(name):
    assert run(name) == run(name)
    assert repr(run(name)) == repr(run(name))


@pytest.mark.parametrize("name", sorted(SCENARIOS))
def test_result_invariants(name):
    schema, sc = corpus(SCENARIOS[name]), scenario(name)
    r = simulate(schema, sc)
    seen = set()
    for e in r.log:
        assert (e.tick, e.token) not in seen  # one location per token per tick
        seen.add((e.tick, e.token))
    ticks = [e.tick for e in r.log]
    assert ticks == sorted(ticks)
    fired = {(f.tick, n) for f in r.slices for n in f.events}
    for inst in r.trace.instances:
        assert 0 <= inst.start <= inst.end <= sc.max_ticks
        region = schema.event(inst.event).stages
        occupied = any(e.at in region and inst.start <= e.tick < inst.end for e in r.log)
        assert occupied or (inst.start, inst.event) in fired


def test_invalid_schema_refused():
    bad = parse_schema("sphere S { machine M { stages: create, process } } flow S.M.process -> S.M.create")
    with pytest.raises(ValidationFailed) as exc:
        simulate(bad, Scenario(max_ticks=3))
    assert exc.value.diagnostics[0].rule == "V-FLOW"


@pytest.mark.parametrize(
    "text",
    ["inject Station.Bus.transfer @ 0; max_ticks 5", "inject Station.Car @ 0; max_ticks 5", "time_machine period 1 count 1 -> Nope; max_ticks 5"],
)
def test_unresolved_scenario_refs(text):
    with pytest.raises(UnresolvedScenarioRef):
        simulate(corpus("robots.fm"), parse_scenario(text))


def test_time_machine_event_with_duration():
    s = parse_schema(
        "sphere S { machine M { stages: create, process } } flow S.M.create -> S.M.process "
        "event Long { region: S.M duration 4 }"
    )
    r = simulate(s, Scenario(time_machine=TimeMachine(2, 2, ("Long",)), max_ticks=5))
    assert [(i.start, i.end) for i in r.trace.instances] == [(0, 4), (2, 5)]


CORPUS_SCHEMAS = {name: corpus(name) for name in sorted(set(SCENARIOS.values()))}
STAGE_PATHS = {name: [str(ref) for ref in s.iter_stages()] for name, s in CORPUS_SCHEMAS.items()}


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(sorted(CORPUS_SCHEMAS)), st.integers(0, 2**32 - 1))
def test_random_scenarios_on_valid_schemas(name, seed):
    rng = random.Random(seed)
    schema = CORPUS_SCHEMAS[name]
    bound = rng.randint(1, 25)
    injections = tuple((rng.choice(STAGE_PATHS[name]), rng.randrange(bound)) for _ in range(rng.randint(0, 4)))
    tm = None
    if schema.events and rng.random() < 0.5:
        period = rng.randint(1, bound)
        tm = TimeMachine(period, rng.randint(1, bound // period), (rng.choice(schema.events).name,))
    sc = Scenario(injections, tm, bound)
    first = simulate(schema, sc)
    assert first == simulate(schema, sc)
    assert first.ticks <= bound
    assert (first.terminated == MAX_TICKS) == bool(first.warnings)
