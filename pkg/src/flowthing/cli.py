"""``fm`` command line.

Exit codes: 0 success, 1 rule violations (validation errors, unknown render
events, unresolved scenario references), 2 syntax, usage or I/O failures.
Query answers from ``fm trace`` go to stdout and always exit 0.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence, TextIO

from .events import EmptyTrace, EventDef, Trace, contains, implies, subtrace, trace_time
from .export import ExportError, parse_trace_document, timeline, to_dot, trace_to_document
from .formatter import format_scenario, format_schema, split_comments, with_header
from .model import Schema
from .parser import parse_scenario, parse_schema
from .simulator import MAX_TICKS, UnresolvedScenarioRef, ValidationFailed, simulate
from .syntax import ParseError
from .validator import errors, validate

OK, FAILED, USAGE = 0, 1, 2


class CliError(Exception):
    def __init__(self, message: str, code: int = USAGE) -> None:
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise CliError(f"{self.format_usage()}{self.prog}: error: {message}")


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def _read(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror or exc}") from None


def _parse_failure(exc: ParseError, err: TextIO) -> int:
    for d in exc.diagnostics:
        print(d, file=err)
    return FAILED if exc.diagnostics and exc.only_rule_violations else USAGE


def _load_schema(path: str) -> Schema:
    return parse_schema(_read(path), path)


def _event(schema: Schema, name: str, code: int) -> EventDef:
    ev = schema.event(name)
    if ev is None:
        raise CliError(f"unknown event {name!r}", code)
    return ev


# -- subcommands -----------------------------------------------------------------


def cmd_validate(args, out: TextIO, err: TextIO) -> int:
    try:
        schema = _load_schema(args.file)
    except ParseError as exc:
        if args.format == "doc":
            _dump(_diag_doc(args.file, [_parse_record(d) for d in exc.diagnostics]), out)
            return FAILED if exc.only_rule_violations else USAGE
        return _parse_failure(exc, err)
    diags = validate(schema)
    if args.format == "doc":
        records = [
            {"severity": d.severity, "code": d.rule, "message": d.message, "subject": d.subject, "line": None, "column": None}
            for d in diags
        ]
        _dump(_diag_doc(args.file, records), out)
    else:
        for d in diags:
            print(d, file=err)
        n_err = len(errors(diags))
        print(f"{args.file}: {n_err} error(s), {len(diags) - n_err} warning(s)", file=out)
    return FAILED if errors(diags) else OK


def _parse_record(d) -> dict:
    return {"severity": d.severity, "code": d.code, "message": d.message, "subject": None, "line": d.span.line, "column": d.span.column}


def _diag_doc(file: str, records: list[dict]) -> dict:
    n_err = sum(r["severity"] == "error" for r in records)
    return {"file": file, "errors": n_err, "warnings": len(records) - n_err, "diagnostics": records}


def _dump(doc: dict, out: TextIO) -> None:
    out.write(json.dumps(doc, indent=2, ensure_ascii=False) + "\n")


def cmd_fmt(args, out: TextIO, err: TextIO) -> int:
    raw = _read(args.file)
    try:
        if args.file.endswith(".fms"):
            text = format_scenario(parse_scenario(raw, args.file))
        else:
            text = format_schema(parse_schema(raw, args.file))
    except ParseError as exc:
        _parse_failure(exc, err)
        return USAGE  # fmt cannot format what it cannot parse, whatever the cause
    header, dropped = split_comments(raw)
    canonical = with_header(header, text).encode("utf-8")
    if args.check:
        if raw != canonical:
            print(f"{args.file}: not canonically formatted", file=err)
            return FAILED
        return OK
    if raw != canonical:
        if dropped:
            print(f"{args.file}: warning: {dropped} comment(s) after the first declaration were dropped", file=err)
        try:
            Path(args.file).write_bytes(canonical)
        except OSError as exc:
            raise CliError(f"cannot write {args.file}: {exc.strerror or exc}") from None
    return OK


def cmd_render(args, out: TextIO, err: TextIO) -> int:
    try:
        schema = _load_schema(args.file)
    except ParseError as exc:
        return _parse_failure(exc, err)
    problems = errors(validate(schema))
    if problems:
        for d in problems:
            print(d, file=err)
        return FAILED
    overlay = [_event(schema, name, FAILED) for name in args.event or ()]
    dot = to_dot(schema, overlay)
    _emit(dot, args.output, out)
    return OK


def _emit(text: str, path: str | None, out: TextIO) -> None:
    if path is None:
        out.write(text)
        return
    try:
        Path(path).write_bytes(text.encode("utf-8"))
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc.strerror or exc}") from None


def cmd_simulate(args, out: TextIO, err: TextIO) -> int:
    try:
        schema = _load_schema(args.file)
    except ParseError as exc:
        return _parse_failure(exc, err)
    if args.scenario is not None:
        source, name = _read(args.scenario), args.scenario
    else:
        source, name = args.inline, "<inline>"
    try:
        scenario = parse_scenario(source, name, max_ticks=args.max_ticks)
    except ParseError as exc:
        for d in exc.diagnostics:
            print(d, file=err)
        return USAGE
    try:
        result = simulate(schema, scenario)
    except ValidationFailed as exc:
        for d in exc.diagnostics:
            print(d, file=err)
        return FAILED
    except UnresolvedScenarioRef as exc:
        print(f"{name}: {exc}", file=err)
        return FAILED
    if result.terminated == MAX_TICKS:
        print(f"warning: stopped at max_ticks={scenario.max_ticks} with activity pending", file=err)
    out.write(timeline(result) if args.format == "timeline" else trace_to_document(result).to_json())
    return OK


def _trace_arg(ref: str) -> Trace:
    try:
        return parse_trace_document(_read(ref)).trace()
    except ExportError as exc:
        raise CliError(f"{ref}: {exc}") from None


def cmd_trace(args, out: TextIO, err: TextIO) -> int:
    schema = None
    if args.query in ("contains", "implies"):
        try:
            schema = _load_schema(args.schema)
        except ParseError as exc:
            for d in exc.diagnostics:
                print(d, file=err)
            return USAGE
    if args.query == "contains":
        answer = contains(_event(schema, args.outer, USAGE), _event(schema, args.inner, USAGE))
    elif args.query == "implies":
        answer = implies(_event(schema, args.a, USAGE), _event(schema, args.b, USAGE))
    elif args.query == "subtrace":
        answer = subtrace(_trace_arg(args.candidate), _trace_arg(args.of))
    else:
        try:
            print(trace_time(_trace_arg(args.trace)), file=out)
        except EmptyTrace as exc:
            raise CliError(str(exc)) from None
        return OK
    print("true" if answer else "false", file=out)
    return OK


# -- wiring ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fm", description="Flowthing machine toolchain")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("validate", help="check a schema")
    v.add_argument("file")
    v.add_argument("--format", choices=("text", "doc"), default="text")
    v.set_defaults(run=cmd_validate)

    f = sub.add_parser("fmt", help="rewrite a schema or scenario in canonical form")
    f.add_argument("file")
    f.add_argument("--check", action="store_true", help="only report whether the file is canonical")
    f.set_defaults(run=cmd_fmt)

    r = sub.add_parser("render", help="write a DOT diagram")
    r.add_argument("file")
    r.add_argument("--event", nargs="+", metavar="NAME", help="events to overlay")
    r.add_argument("-o", "--output", metavar="OUT")
    r.set_defaults(run=cmd_render)

    s = sub.add_parser("simulate", help="run a scenario")
    s.add_argument("file")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", metavar="FILE")
    src.add_argument("--inline", metavar="TEXT")
    s.add_argument("--max-ticks", type=_positive, metavar="N")
    s.add_argument("--format", choices=("doc", "timeline"), default="doc")
    s.set_defaults(run=cmd_simulate)

    t = sub.add_parser("trace", help="event and trace queries")
    tq = t.add_subparsers(dest="query", required=True, parser_class=_Parser)
    c = tq.add_parser("contains")
    c.add_argument("--outer", required=True)
    c.add_argument("--inner", required=True)
    c.add_argument("--schema", required=True)
    i = tq.add_parser("implies")
    i.add_argument("--a", required=True)
    i.add_argument("--b", required=True)
    i.add_argument("--schema", required=True)
    st = tq.add_parser("subtrace", help="compare two trace documents")
    st.add_argument("--of", required=True)
    st.add_argument("--candidate", required=True)
    tt = tq.add_parser("time", help="trace time of a trace document")
    tt.add_argument("--trace", required=True)
    t.set_defaults(run=cmd_trace)
    return p


def main(argv: Sequence[str] | None = None, out: TextIO | None = None, err: TextIO | None = None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        return args.run(args, out, err)
    except CliError as exc:
        print(exc, file=err)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
