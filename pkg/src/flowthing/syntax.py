"""Tokens, source spans and diagnostics shared by the schema and scenario parsers."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator

# Diagnostic codes that name validator rules; everything else is syntax.
RULE_CODES = frozenset(
    {"V-EXCL", "V-RECEP", "V-FLOW", "V-XBOUND", "V-TRIG", "V-REGION", "V-TRACE", "V-SPHERE"}
)


@dataclass(frozen=True, order=True)
class SourceSpan:
    line: int
    column: int
    length: int = 0
    file: str = "<string>"

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


@dataclass(frozen=True)
class ParseDiagnostic:
    severity: str
    code: str
    message: str
    span: SourceSpan

    @property
    def is_rule(self) -> bool:
        return self.code in RULE_CODES

    def __str__(self) -> str:
        return f"{self.span}: {self.severity}[{self.code}]: {self.message}"


class ParseError(Exception):
    def __init__(self, diagnostics: list[ParseDiagnostic]) -> None:
        self.diagnostics = sorted(diagnostics, key=lambda d: (d.span.line, d.span.column))
        first = self.diagnostics[0] if self.diagnostics else None
        super().__init__(str(first) if first else "parse failed")

    @property
    def only_rule_violations(self) -> bool:
        return all(d.is_rule for d in self.diagnostics)


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT INT STRING PUNCT EOF
    text: str
    span: SourceSpan
    value: object = None

    def is_punct(self, text: str) -> bool:
        return self.kind == "PUNCT" and self.text == text

    def is_word(self, text: str) -> bool:
        return self.kind == "IDENT" and self.text == text


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*(?:-[A-Za-z0-9_]+)*)
  | (?P<int>-?[0-9]+)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<punct>->|~>|[{}:,.;()@])
    """,
    re.VERBOSE,
)


def _unescape(raw: str) -> str:
    return re.sub(r"\\(.)", r"\1", raw[1:-1])


def decode(source: str | bytes, file: str, diagnostics: list[ParseDiagnostic]) -> str:
    if isinstance(source, bytes):
        try:
            source = source.decode("utf-8")
        except UnicodeDecodeError as exc:
            diagnostics.append(
                ParseDiagnostic("error", "P-ENCODING", f"input is not UTF-8 ({exc.reason})", SourceSpan(1, 1, 0, file))
            )
            source = source.decode("utf-8", errors="replace")
    if source.startswith("\ufeff"):
        source = source[1:]
    return source


def tokenize(
    text: str, file: str, diagnostics: list[ParseDiagnostic], comments: list[tuple[int, str]] | None = None
) -> list[Token]:
    """Lex ``text``. Comments are skipped, or collected as (line, text) when ``comments`` is given."""
    tokens: list[Token] = []
    line, line_start, pos = 1, 0, 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            ch = text[pos]
            if ch == '"':
                end = text.find("\n", pos)
                end = n if end < 0 else end
                diagnostics.append(
                    ParseDiagnostic("error", "P-STRING", "unterminated string", SourceSpan(line, col, end - pos, file))
                )
                pos = end
            else:
                diagnostics.append(
                    ParseDiagnostic("error", "P-CHAR", f"unexpected character {ch!r}", SourceSpan(line, col, 1, file))
                )
                pos += 1
            continue
        kind = m.lastgroup
        lexeme = m.group()
        span = SourceSpan(line, col, len(lexeme), file)
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "ident":
            tokens.append(Token("IDENT", lexeme, span))
        elif kind == "int":
            tokens.append(Token("INT", lexeme, span, int(lexeme)))
        elif kind == "string":
            tokens.append(Token("STRING", lexeme, span, _unescape(lexeme)))
        elif kind == "punct":
            tokens.append(Token("PUNCT", lexeme, span))
        elif kind == "comment" and comments is not None:
            comments.append((line, lexeme.rstrip()))
        pos = m.end()
    tokens.append(Token("EOF", "", SourceSpan(line, pos - line_start + 1, 0, file)))
    return tokens


class Bail(Exception):
    """Abandon the current declaration; the diagnostic is already recorded."""


class TokenStream:
    def __init__(self, tokens: list[Token], diagnostics: list[ParseDiagnostic]) -> None:
        self.tokens = tokens
        self.i = 0
        self.diagnostics = diagnostics

    @property
    def peek(self) -> Token:
        return self.tokens[self.i]

    def next(self) -> Token:
        tok = self.tokens[self.i]
        if tok.kind != "EOF":
            self.i += 1
        return tok

    def error(self, code: str, message: str, span: SourceSpan) -> None:
        self.diagnostics.append(ParseDiagnostic("error", code, message, span))

    def fail(self, message: str, tok: Token | None = None, code: str = "P-SYNTAX") -> Bail:
        tok = tok or self.peek
        found = "end of input" if tok.kind == "EOF" else repr(tok.text)
        self.error(code, f"{message}, found {found}", tok.span)
        return Bail()

    def accept(self, punct: str) -> Token | None:
        if self.peek.is_punct(punct):
            return self.next()
        return None

    def expect(self, punct: str) -> Token:
        if not self.peek.is_punct(punct):
            raise self.fail(f"expected {punct!r}")
        return self.next()

    def expect_word(self, word: str) -> Token:
        if not self.peek.is_word(word):
            raise self.fail(f"expected {word!r}")
        return self.next()

    def ident(self, what: str = "a name") -> Token:
        if self.peek.kind != "IDENT":
            raise self.fail(f"expected {what}")
        return self.next()

    def integer(self, what: str = "an integer") -> Token:
        if self.peek.kind != "INT":
            raise self.fail(f"expected {what}")
        return self.next()

    def path(self) -> tuple[str, SourceSpan]:
        first = self.ident("a path")
        parts = [first.text]
        last = first
        while self.peek.is_punct(".") and self.tokens[self.i + 1].kind == "IDENT":
            self.next()
            last = self.next()
            parts.append(last.text)
        if self.peek.is_punct("."):
            raise self.fail("expected a name after '.'")
        span = first.span
        if last.span.line == span.line:
            span = SourceSpan(span.line, span.column, last.span.column + last.span.length - span.column, span.file)
        return ".".join(parts), span

    def synchronize(self, keywords: frozenset[str]) -> None:
        """Skip to the next top-level keyword outside any braces."""
        depth = 0
        while self.peek.kind != "EOF":
            tok = self.peek
            if depth == 0 and tok.kind == "IDENT" and tok.text in keywords and self._at_line_start():
                return
            if tok.is_punct("{"):
                depth += 1
            elif tok.is_punct("}"):
                depth = max(0, depth - 1)
            self.next()

    def _at_line_start(self) -> bool:
        if self.i == 0:
            return True
        prev = self.tokens[self.i - 1]
        return prev.span.line < self.peek.span.line or prev.is_punct(";") or prev.is_punct("}")

    def iter_separated(self, item) -> Iterator:
        """``item (',' item)*``"""
        yield item()
        while self.accept(","):
            yield item()
