"""Filter expressions over table columns.

Grammar (conjunctions of numeric comparisons, with a range shorthand)::

    expr   := clause (('and' | '&') clause)*
    clause := number '<' ident '<' number
            | ident cmp number          cmp in { < <= > >= == != }

``"-74.20 < pickup_longitude < -73.1"`` desugars into two comparisons.
The empty string parses to a match-all predicate.
"""

import re
from dataclasses import dataclass

import numpy as np

from .errors import FilterEvalError, FilterSyntaxError

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<op><=|>=|==|!=|<|>|&)
  | (?P<number>[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_]\w*)
""",
    re.VERBOSE,
)

_COMPARE = {
    "<": np.less,
    "<=": np.less_equal,
    ">": np.greater,
    ">=": np.greater_equal,
    "==": np.equal,
    "!=": np.not_equal,
}


@dataclass(frozen=True)
class MatchAll:
    def unparse(self) -> str:
        return ""

    def columns(self) -> frozenset:
        return frozenset()


@dataclass(frozen=True)
class Comparison:
    column: str
    op: str
    value: float

    def unparse(self) -> str:
        return f"{self.column} {self.op} {_format_number(self.value)}"

    def columns(self) -> frozenset:
        return frozenset([self.column])


@dataclass(frozen=True)
class And:
    clauses: tuple

    def unparse(self) -> str:
        return " and ".join(c.unparse() for c in self.clauses)

    def columns(self) -> frozenset:
        return frozenset().union(*(c.columns() for c in self.clauses))


def _format_number(v: float) -> str:
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


@dataclass(frozen=True)
class _Token:
    kind: str  # op | number | ident | and | end
    text: str
    pos: int


def _tokenize(text: str) -> list:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise FilterSyntaxError(f"unexpected character {text[pos]!r}", pos)
        if m.lastgroup != "ws":
            kind = m.lastgroup
            value = m.group()
            if kind == "ident" and value == "and":
                kind = "and"
            elif kind == "op" and value == "&":
                kind = "and"
            tokens.append(_Token(kind, value, pos))
        pos = m.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, tokens):
        self._tokens = tokens
        self._i = 0

    def peek(self) -> _Token:
        return self._tokens[self._i]

    def take(self, kind, what=None) -> _Token:
        tok = self._tokens[self._i]
        if tok.kind != kind:
            expected = what or kind
            raise FilterSyntaxError(f"expected {expected}, found {tok.text or 'end of input'!r}", tok.pos)
        self._i += 1
        return tok

    def parse(self):
        clauses = list(self._clause())
        while self.peek().kind == "and":
            self.take("and")
            clauses.extend(self._clause())
        end = self.peek()
        if end.kind != "end":
            raise FilterSyntaxError(f"unexpected trailing {end.text!r}", end.pos)
        if len(clauses) == 1:
            return clauses[0]
        return And(tuple(clauses))

    def _clause(self):
        tok = self.peek()
        if tok.kind == "number":
            low = float(self.take("number").text)
            op = self.take("op", "'<'")
            if op.text != "<":
                raise FilterSyntaxError("range clause allows only '<'", op.pos)
            ident = self.take("ident", "column name")
            op2 = self.take("op", "'<'")
            if op2.text != "<":
                raise FilterSyntaxError("range clause allows only '<'", op2.pos)
            high = float(self.take("number").text)
            return (
                Comparison(ident.text, ">", low),
                Comparison(ident.text, "<", high),
            )
        if tok.kind == "ident":
            ident = self.take("ident")
            op = self.take("op", "a comparison operator")
            value = float(self.take("number", "a number").text)
            return (Comparison(ident.text, op.text, value),)
        raise FilterSyntaxError(
            f"expected a clause, found {tok.text or 'end of input'!r}", tok.pos
        )


def parse_filter(text: str):
    """Parse a filter expression; empty input yields a match-all predicate."""
    if text is None or not text.strip():
        return MatchAll()
    return _Parser(_tokenize(text)).parse()


def unparse(expr) -> str:
    return expr.unparse()


def evaluate(expr, columns: dict, n: int) -> np.ndarray:
    """Boolean mask of length n; ``columns`` maps names to aligned arrays."""
    if isinstance(expr, MatchAll):
        return np.ones(n, dtype=bool)
    if isinstance(expr, Comparison):
        if expr.column not in columns:
            raise FilterEvalError(f"unknown column {expr.column!r}")
        values = np.asarray(columns[expr.column], dtype=np.float64)
        with np.errstate(invalid="ignore"):
            return _COMPARE[expr.op](values, expr.value)
    if isinstance(expr, And):
        mask = np.ones(n, dtype=bool)
        for clause in expr.clauses:
            mask &= evaluate(clause, columns, n)
        return mask
    raise TypeError(f"not a filter expression: {expr!r}")
