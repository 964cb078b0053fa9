import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowthing.formatter import format_scenario, format_schema, split_comments, with_header
from flowthing.model import StageKind
from flowthing.parser import parse_scenario, parse_schema
from flowthing.syntax import ParseError, tokenize

from conftest import CORPUS, SCENARIOS, SCHEMAS

BALL = """
sphere Air {
  machine Ball {
    stages: transfer, receive, process
  }
  machine Heat {
    stages: transfer, receive, process
  }
  machine Rotation {
    stages: create, process
  }
}
flow Air.Ball.transfer -> Air.Ball.receive
flow Air.Heat.transfer -> Air.Heat.receive
flow Air.Heat.receive -> Air.Heat.process
flow Air.Rotation.create -> Air.Rotation.process
"""


def codes(text, parse=parse_schema):
    with pytest.raises(ParseError) as exc:
        parse(text)
    return [d.code for d in exc.value.diagnostics]


def perturb(text: str, seed: int) -> str:
    """Same tokens, different whitespace; comments are dropped."""
    rng = random.Random(seed)
    toks = [t.text for t in tokenize(text, "<p>", []) if t.kind != "EOF"]
    seps = [" ", "  ", "\n", "\t", " \r\n", "\n\n   "]
    return rng.choice(["", "\n"]) + "".join(t + rng.choice(seps) for t in toks)


def test_empty_input():
    s = parse_schema("")
    assert s.spheres == () and s.flows == () and s.events == ()
    assert format_schema(s) == ""
    assert parse_schema("# only a comment\n\n").spheres == ()


def test_ball_text():
    s = parse_schema(BALL)
    assert len(s.spheres) == 1
    assert len(s.spheres[0].machines) >= 2


def test_combined_and_split_reception():
    text = "sphere X { machine M { stages: receive, arrive } }"
    with pytest.raises(ParseError) as exc:
        parse_schema(text)
    (d,) = exc.value.diagnostics
    assert d.code == "V-RECEP" and d.severity == "error"
    assert exc.value.only_rule_violations
    assert (d.span.line, d.span.column) >= (1, 1)


def test_references_before_declarations():
    s = parse_schema("flow S.M.create -> S.M.process\nsphere S { machine M { stages: create, process } }")
    assert len(s.flows) == 1


def test_crlf_and_bom_accepted():
    text = "\ufeffsphere S {\r\n  machine M {\r\n    stages: create\r\n  }\r\n}\r\n"
    assert parse_schema(text.encode("utf-8")).spheres[0].machines[0].stages == (StageKind.CREATE,)


@pytest.mark.parametrize(
    "text, code",
    [
        ("spher X {}", "P-KEYWORD"),
        ("sphere X { machine M { stages: create, dance } }", "P-STAGE"),
        ("sphere X { machine M { stages: create, create } }", "V-EXCL"),
        ("sphere X {} sphere X {}", "V-SPHERE"),
        ('sphere X { machine M { stages: create } } event E "oops { region: X.M }', "P-STRING"),
        ("sphere X { machine M { stages: create } } $", "P-CHAR"),
        ("sphere X { machine M { stages: create, process } } flow X.M.process -> X.M.release", "V-FLOW"),
        ("sphere X { machine M { stages: create } } trigger X.M.create ~> X.N.create", "V-TRIG"),
        ("sphere X { machine M { stages: create } } event E { region: X.N }", "V-REGION"),
        ("sphere X { machine M { stages: create } } trace T: Nope", "V-TRACE"),
        ("sphere X { machine M { stages: process storage: create } }", "P-STORAGE"),
    ],
)
def test_error_codes(text, code):
    assert code in codes(text)


def test_invalid_utf8():
    assert "P-ENCODING" in codes(b"sphere \xff {}")


def test_diagnostics_ordered_and_located():
    text = "sphere A {\n  machine M { stages: dance }\n}\nflw\nsphere B { machine N { stages: juggle } }\n"
    with pytest.raises(ParseError) as exc:
        parse_schema(text, "bad.fm")
    diags = exc.value.diagnostics
    assert len(diags) >= 2
    keys = [(d.span.line, d.span.column) for d in diags]
    assert keys == sorted(keys)
    assert all(d.span.line >= 1 and d.span.column >= 1 and d.span.file == "bad.fm" for d in diags)


@pytest.mark.parametrize("name", SCHEMAS)
def test_corpus_round_trip(name):
    text = (CORPUS / name).read_text()
    s = parse_schema(text)
    out = format_schema(s)
    assert parse_schema(out) == s
    assert format_schema(parse_schema(out)) == out


@pytest.mark.parametrize("name", SCHEMAS)
@pytest.mark.parametrize("seed", range(3))
def test_whitespace_perturbation_formats_identically(name, seed):
    text = (CORPUS / name).read_text()
    twisted = perturb(text, seed)
    assert twisted != text
    assert format_schema(parse_schema(twisted)) == format_schema(parse_schema(text))


@pytest.mark.parametrize("name", sorted(SCENARIOS))
def test_scenario_round_trip(name):
    sc = parse_scenario((CORPUS / name).read_text())
    out = format_scenario(sc)
    assert parse_scenario(out) == sc
    assert format_scenario(parse_scenario(perturb(out, 1))) == out


def test_scenario_examples():
    sc = parse_scenario("inject John.transfer @ 0; max_ticks 10")
    assert sc.injections == (("John.transfer", 0),) and sc.max_ticks == 10
    sc = parse_scenario("time_machine period 1 count 3 -> NeedleEvent; max_ticks 10")
    assert sc.time_machine.slices() == [0, 1, 2]
    assert sc.time_machine.targets == ("NeedleEvent",)


@pytest.mark.parametrize(
    "text",
    [
        "inject X.M.create @ 12; max_ticks 10",
        "inject X.M.create @ 0",
        "inject X.M.create @ -1; max_ticks 10",
        "max_ticks 0",
        "max_ticks 5; max_ticks 6",
        "time_machine period 0 count 3 -> E; max_ticks 10",
        "time_machine period 4 count 3 -> E; max_ticks 10",
        "launch X @ 0; max_ticks 10",
    ],
)
def test_scenario_errors(text):
    assert codes(text, parse_scenario)


def test_scenario_max_ticks_override():
    assert parse_scenario("inject A.B.create @ 3", max_ticks=4).max_ticks == 4
    assert parse_scenario("max_ticks 9", max_ticks=20).max_ticks == 20


def test_header_comments_survive_formatting():
    text = "# header line\n# second\n\nsphere S {} # trailing\n"
    header, dropped = split_comments(text)
    assert header == "# header line\n# second\n" and dropped == 1
    out = with_header(header, format_schema(parse_schema(text)))
    assert out == "# header line\n# second\n\nsphere S {}\n"
    assert with_header(*[split_comments(out)[0], format_schema(parse_schema(out))]) == out


@settings(max_examples=300, deadline=None)
@given(st.binary(max_size=200))
def test_parser_total_on_bytes(data):
    for parse in (parse_schema, parse_scenario):
        try:
            parse(data)
        except ParseError as exc:
            assert exc.diagnostics


@settings(max_examples=300, deadline=None)
@given(st.text(alphabet="sphere machine stages: create process flow trigger event region ->~>{}.,;@#\"\n", max_size=120))
def test_parser_total_on_keyword_soup(text):
    try:
        parse_schema(text)
    except ParseError as exc:
        assert all(d.severity == "error" for d in exc.diagnostics)
