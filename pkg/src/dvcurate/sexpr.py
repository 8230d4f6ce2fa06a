"""Minimal s-expression reader shared by the task-spec and query parsers.

Forms are parenthesized lists of atoms.  Atoms are symbols (`pick`), keywords
(`:name`), double-quoted strings, and decimal numbers.  Comments run from `;`
to end of line.  Every atom and list remembers its 1-based line and column so
parse errors can point at source positions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import SpecSyntaxError

_NUMBER_RE = re.compile(r"[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")
_SYMBOL_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_\-]*")


@dataclass(frozen=True)
class Symbol:
    name: str
    line: int
    col: int


@dataclass(frozen=True)
class Keyword:
    name: str
    line: int
    col: int


@dataclass(frozen=True)
class String:
    value: str
    line: int
    col: int


@dataclass(frozen=True)
class Number:
    value: float
    line: int
    col: int


@dataclass
class SList:
    items: list = field(default_factory=list)
    line: int = 1
    col: int = 1


Form = Symbol | Keyword | String | Number | SList


class _Scanner:
    def __init__(self, source: str):
        self.src = source
        self.pos = 0
        self.line = 1
        self.col = 1

    def peek(self) -> str:
        return self.src[self.pos] if self.pos < len(self.src) else ""

    def advance(self, n: int = 1) -> None:
        for _ in range(n):
            if self.pos >= len(self.src):
                return
            if self.src[self.pos] == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
            self.pos += 1

    def skip_blank(self) -> None:
        while self.pos < len(self.src):
            c = self.src[self.pos]
            if c == ";":
                while self.pos < len(self.src) and self.src[self.pos] != "\n":
                    self.advance()
            elif c.isspace():
                self.advance()
            else:
                return


def _read_string(sc: _Scanner) -> String:
    line, col = sc.line, sc.col
    sc.advance()  # opening quote
    out = []
    while True:
        c = sc.peek()
        if c == "":
            raise SpecSyntaxError("unterminated string", line, col)
        if c == '"':
            sc.advance()
            return String("".join(out), line, col)
        if c == "\\":
            sc.advance()
            esc = sc.peek()
            if esc == "":
                raise SpecSyntaxError("unterminated string escape", sc.line, sc.col)
            if esc not in ('"', "\\", "n", "t"):
                raise SpecSyntaxError(f"unknown string escape '\\{esc}'", sc.line, sc.col)
            out.append({"n": "\n", "t": "\t"}.get(esc, esc))
            sc.advance()
        else:
            out.append(c)
            sc.advance()


def _read_atom(sc: _Scanner) -> Form:
    line, col = sc.line, sc.col
    c = sc.peek()
    if c == '"':
        return _read_string(sc)
    if c == ":":
        sc.advance()
        m = _SYMBOL_RE.match(sc.src, sc.pos)
        if not m or m.start() != sc.pos:
            raise SpecSyntaxError("expected keyword name after ':'", line, col)
        sc.advance(m.end() - sc.pos)
        return Keyword(m.group(0), line, col)
    if c.isdigit() or c in "+-." :
        m = _NUMBER_RE.match(sc.src, sc.pos)
        if not m or m.start() != sc.pos:
            raise SpecSyntaxError(f"malformed number starting at {c!r}", line, col)
        end = m.end()
        if end < len(sc.src) and not sc.src[end].isspace() and sc.src[end] not in "();":
            raise SpecSyntaxError(f"malformed number {sc.src[sc.pos:end + 1]!r}", line, col)
        sc.advance(end - sc.pos)
        return Number(float(m.group(0)), line, col)
    m = _SYMBOL_RE.match(sc.src, sc.pos)
    if not m or m.start() != sc.pos:
        raise SpecSyntaxError(f"unexpected character {c!r}", line, col)
    sc.advance(m.end() - sc.pos)
    return Symbol(m.group(0), line, col)


def _read_form(sc: _Scanner) -> Form:
    sc.skip_blank()
    c = sc.peek()
    if c == "":
        raise SpecSyntaxError("unexpected end of input", sc.line, sc.col)
    if c == "(":
        lst = SList([], sc.line, sc.col)
        sc.advance()
        while True:
            sc.skip_blank()
            nxt = sc.peek()
            if nxt == "":
                raise SpecSyntaxError("unbalanced '(': missing ')'", lst.line, lst.col)
            if nxt == ")":
                sc.advance()
                return lst
            lst.items.append(_read_form(sc))
    if c == ")":
        raise SpecSyntaxError("unbalanced ')'", sc.line, sc.col)
    return _read_atom(sc)


def read_all(source: str) -> list[Form]:
    """Read every top-level form in `source`."""
    sc = _Scanner(source)
    forms = []
    while True:
        sc.skip_blank()
        if sc.peek() == "":
            return forms
        forms.append(_read_form(sc))


def read_one(source: str) -> Form:
    """Read exactly one top-level form; empty or trailing input is an error."""
    sc = _Scanner(source)
    sc.skip_blank()
    if sc.peek() == "":
        raise SpecSyntaxError("empty input", 1, 1)
    form = _read_form(sc)
    sc.skip_blank()
    if sc.peek() != "":
        raise SpecSyntaxError("unexpected trailing input", sc.line, sc.col)
    return form


def position(form: Form) -> tuple[int, int]:
    return form.line, form.col


def head_symbol(form: Form, expected: str | None = None) -> Symbol:
    """Return the leading symbol of a list form, checking its name if given."""
    if not isinstance(form, SList) or not form.items:
        line, col = position(form)
        raise SpecSyntaxError("expected a non-empty list form", line, col)
    head = form.items[0]
    if not isinstance(head, Symbol):
        raise SpecSyntaxError("expected a symbol at list head", *position(head))
    if expected is not None and head.name != expected:
        raise SpecSyntaxError(f"expected ({expected} ...), got ({head.name} ...)", head.line, head.col)
    return head


def keyword_fields(items: list[Form], context: str) -> list[tuple[Keyword, list[Form]]]:
    """Split `items` into (keyword, argument-forms) runs.

    Items must begin with a keyword; duplicate keywords are rejected.
    """
    fields: list[tuple[Keyword, list[Form]]] = []
    seen: set[str] = set()
    i = 0
    while i < len(items):
        kw = items[i]
        if not isinstance(kw, Keyword):
            raise SpecSyntaxError(f"expected a :keyword in {context}", *position(kw))
        if kw.name in seen:
            raise SpecSyntaxError(f"duplicate :{kw.name} in {context}", kw.line, kw.col)
        seen.add(kw.name)
        args: list[Form] = []
        i += 1
        while i < len(items) and not isinstance(items[i], Keyword):
            args.append(items[i])
            i += 1
        fields.append((kw, args))
    return fields


def as_number(form: Form, what: str) -> Number:
    if not isinstance(form, Number):
        raise SpecSyntaxError(f"expected a number for {what}", *position(form))
    return form


def as_string(form: Form, what: str) -> String:
    if not isinstance(form, String):
        raise SpecSyntaxError(f"expected a string for {what}", *position(form))
    return form


def as_symbol(form: Form, what: str) -> Symbol:
    if not isinstance(form, Symbol):
        raise SpecSyntaxError(f"expected a symbol for {what}", *position(form))
    return form
