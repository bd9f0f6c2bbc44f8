"""Conditional breakpoint predicates over node HEAD states.

Grammar::

    exists(<Type>)
    exists(<Type>, <dim> <op> <literal> [and <dim> <op> <literal>]...)

with ``op`` one of == != < <= > >= and literals being integers, floats,
single- or double-quoted strings, or true/false. A predicate holds when some
object of the named type satisfies every clause. Parse errors surface at
registration; evaluation never raises (a clause on a missing dimension or a
cross-kind comparison is simply false).
"""

from __future__ import annotations

import operator
import re
from dataclasses import dataclass

from .schema import State

OPS = {
    "==": operator.eq,
    "!=": operator.ne,
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
}

_TOKEN = re.compile(
    r"""\s*(?:
        (?P<op>==|!=|<=|>=|<|>)
      | (?P<punct>[(),])
      | (?P<float>-?\d+\.\d+)
      | (?P<int>-?\d+)
      | (?P<str>'[^']*'|"[^"]*")
      | (?P<word>[A-Za-z_]\w*)
    )""",
    re.VERBOSE,
)


class BreakpointSyntaxError(ValueError):
    """The predicate text does not match the grammar."""


def _tokenize(text: str) -> list[tuple[str, object]]:
    tokens: list[tuple[str, object]] = []
    pos = 0
    while pos < len(text):
        match = _TOKEN.match(text, pos)
        if match is None:
            if text[pos:].strip() == "":
                break
            raise BreakpointSyntaxError(f"unexpected character {text[pos]!r} at {pos}")
        pos = match.end()
        kind = match.lastgroup
        raw = match.group(kind)
        if kind == "float":
            tokens.append(("literal", float(raw)))
        elif kind == "int":
            tokens.append(("literal", int(raw)))
        elif kind == "str":
            tokens.append(("literal", raw[1:-1]))
        elif kind == "word":
            if raw in ("true", "false"):
                tokens.append(("literal", raw == "true"))
            elif raw in ("exists", "and"):
                tokens.append((raw, raw))
            else:
                tokens.append(("name", raw))
        else:
            tokens.append((raw, raw))
    return tokens


@dataclass(frozen=True)
class Clause:
    dim: str
    op: str
    value: object

    def holds(self, dims: dict) -> bool:
        if self.dim not in dims:
            return False
        actual = dims[self.dim]
        expected = self.value
        numeric = (int, float)
        if type(actual) is bool or type(expected) is bool:
            if type(actual) is not bool or type(expected) is not bool:
                return False
        elif isinstance(actual, numeric) != isinstance(expected, numeric):
            return False
        elif isinstance(actual, str) != isinstance(expected, str):
            return False
        try:
            return OPS[self.op](actual, expected)
        except TypeError:
            return False


@dataclass(frozen=True)
class Predicate:
    """Compiled ``exists(...)`` condition."""

    text: str
    type_name: str
    clauses: tuple[Clause, ...]

    def matches(self, state: State) -> bool:
        for obj in state.of_type(self.type_name):
            if all(clause.holds(obj.dims) for clause in self.clauses):
                return True
        return False


class _Parser:
    def __init__(self, tokens: list[tuple[str, object]]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> tuple[str, object] | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self, kind: str) -> object:
        tok = self.peek()
        if tok is None or tok[0] != kind:
            found = "end of input" if tok is None else repr(tok[1])
            raise BreakpointSyntaxError(f"expected {kind}, found {found}")
        self.pos += 1
        return tok[1]

    def parse(self) -> Predicate:
        self.take("exists")
        self.take("(")
        type_name = self.take("name")
        clauses: list[Clause] = []
        if self.peek() and self.peek()[0] == ",":
            self.take(",")
            clauses.append(self.clause())
            while self.peek() and self.peek()[0] == "and":
                self.take("and")
                clauses.append(self.clause())
        self.take(")")
        if self.peek() is not None:
            raise BreakpointSyntaxError(f"trailing input after ')': {self.peek()[1]!r}")
        return Predicate(text="", type_name=type_name, clauses=tuple(clauses))

    def clause(self) -> Clause:
        dim = self.take("name")
        tok = self.peek()
        if tok is None or tok[0] not in OPS:
            found = "end of input" if tok is None else repr(tok[1])
            raise BreakpointSyntaxError(f"expected a comparison operator, found {found}")
        self.pos += 1
        value = self.take("literal")
        return Clause(dim=dim, op=tok[0], value=value)


def compile_predicate(text: str) -> Predicate:
    parsed = _Parser(_tokenize(text)).parse()
    return Predicate(text=text, type_name=parsed.type_name, clauses=parsed.clauses)
