from __future__ import annotations

from pathlib import Path

import pytest

from flowthing.parser import load_scenario, load_schema, parse_schema

CORPUS = Path(__file__).resolve().parents[1] / "src" / "flowthing" / "corpus"
FIXTURES = Path(__file__).resolve().parent / "fixtures"
GOLDEN = Path(__file__).resolve().parent / "golden"
SCHEMAS = sorted(p.name for p in CORPUS.glob("*.fm"))
SCENARIOS = {
    "needle.fms": "needle.fm",
    "hydepark.fms": "hydepark.fm",
    "phoebe.fms": "phoebe.fm",
    "robots.fms": "robots.fm",
    "ball.fms": "robots.fm",
    "professor-nodelay.fms": "professor.fm",
    "professor-delay.fms": "professor.fm",
    "lewis.fms": "lewis.fm",
}


def corpus(name: str):
    return load_schema(CORPUS / name)


def scenario(name: str, **kw):
    return load_scenario(CORPUS / name, **kw)


@pytest.fixture
def chain():
    """One machine with a straight create -> release -> transfer chain, plus a receiver."""
    return parse_schema(
        """
        sphere A {
          machine T { stages: create, release, transfer }
        }
        sphere B {
          machine T { stages: receive, process }
        }
        flow A.T.create -> A.T.release
        flow A.T.release -> A.T.transfer
        flow A.T.transfer -> B.T.receive
        flow B.T.receive -> B.T.process
        """
    )


ACCEPTANCE: dict[int, str] = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE[criterion] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
