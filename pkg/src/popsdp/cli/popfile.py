"""Text format for polynomial optimization problems.

Statements end at ``;`` or at a newline; ``#`` starts a comment::

    vars x1 x2
    minimize x1*x2
    st x1 + 1 >= 0
       1 - x1 >= 0
       -x2^2 >= 0
    ball 2          # optional: append 4 - x1^2 - x2^2 >= 0
    scale           # optional: solve on the unit ball (``scale normalize``
                    # also divides constraints by their largest coefficient)

Every statement after ``st`` (or ``subject to``) is a constraint. A
constraint is ``lhs >= rhs``, ``lhs <= rhs`` or ``lhs = rhs``; the last
becomes two inequalities. Expressions use ``+ - * ^`` and parentheses;
exponents are nonnegative integer literals.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..polynomial import Polynomial
from ..pop import Pop, add_ball_constraint

KEYWORDS = {"vars", "minimize", "st", "subject", "to", "ball", "scale", "normalize"}

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<rel>>=|<=|==|=)
  | (?P<op>[-+*^()])
    """,
    re.VERBOSE,
)


class PopSyntaxError(ValueError):
    """Malformed problem text; ``line`` and ``col`` are 1-based."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, column {col}: {message}")
        self.message = message
        self.line = line
        self.col = col


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _statements(text: str) -> list[list[_Tok]]:
    out: list[list[_Tok]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        col0 = 0
        for part in line.split(";"):
            toks, pos = [], 0
            while pos < len(part):
                m = _TOKEN.match(part, pos)
                if m is None:
                    raise PopSyntaxError(f"unexpected character {part[pos]!r}", lineno, col0 + pos + 1)
                if m.lastgroup != "ws":
                    toks.append(_Tok(m.lastgroup, m.group(), lineno, col0 + pos + 1))
                pos = m.end()
            if toks:
                out.append(toks)
            col0 += len(part) + 1
    return out


class _Parser:
    """Recursive descent over one statement's tokens."""

    def __init__(self, toks: list[_Tok], names: dict[str, int], end: tuple[int, int]):
        self.toks = toks
        self.i = 0
        self.names = names
        self.n = len(names)
        self.end = end

    def peek(self) -> _Tok | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def error(self, message: str, tok: _Tok | None = None):
        tok = tok or self.peek()
        line, col = (tok.line, tok.col) if tok else self.end
        raise PopSyntaxError(message, line, col)

    def take(self) -> _Tok:
        tok = self.peek()
        if tok is None:
            self.error("unexpected end of statement")
        self.i += 1
        return tok

    def expr(self) -> Polynomial:
        p = self.term()
        while (tok := self.peek()) is not None and tok.text in "+-" and tok.kind == "op":
            self.i += 1
            q = self.term()
            p = p + q if tok.text == "+" else p - q
        return p

    def term(self) -> Polynomial:
        p = self.unary()
        while (tok := self.peek()) is not None and tok.text == "*":
            self.i += 1
            p = p * self.unary()
        return p

    def unary(self) -> Polynomial:
        tok = self.peek()
        if tok is not None and tok.kind == "op" and tok.text in "+-":
            self.i += 1
            p = self.unary()
            return -p if tok.text == "-" else p
        return self.power()

    def power(self) -> Polynomial:
        p = self.atom()
        tok = self.peek()
        if tok is not None and tok.text == "^":
            self.i += 1
            e = self.take()
            if e.kind != "num" or not e.text.isdigit():
                self.error("exponent must be a nonnegative integer", e)
            p = p ** int(e.text)
        return p

    def atom(self) -> Polynomial:
        tok = self.take()
        if tok.kind == "num":
            return Polynomial.constant(self.n, float(tok.text))
        if tok.kind == "name":
            if tok.text not in self.names:
                self.error(f"unknown variable {tok.text!r}", tok)
            return Polynomial.variable(self.n, self.names[tok.text])
        if tok.text == "(":
            p = self.expr()
            close = self.take()
            if close.text != ")":
                self.error("expected ')'", close)
            return p
        self.error(f"unexpected {tok.text!r}", tok)

    def done(self) -> None:
        if self.peek() is not None:
            self.error(f"unexpected {self.peek().text!r}")


@dataclass(frozen=True)
class PopDocument:
    """A parsed problem file before any transformation is applied."""

    names: tuple[str, ...]
    objective: Polynomial
    constraints: tuple[Polynomial, ...]
    ball: float | None = None
    scale: bool = False
    normalize: bool = False

    def base_pop(self) -> Pop:
        return Pop(len(self.names), self.objective, self.constraints, names=self.names)

    def to_pop(self) -> Pop:
        """The problem with the ball directive applied (scaling is left to the caller)."""
        pop = self.base_pop()
        return add_ball_constraint(pop, self.ball) if self.ball is not None else pop


def parse_document(text: str) -> PopDocument:
    stmts = _statements(text)
    names: dict[str, int] | None = None
    objective = None
    cons: list[Polynomial] = []
    in_st = False
    ball = None
    scale = normalize = False

    def expr_parser(toks):
        last = toks[-1]
        return _Parser(toks, names, (last.line, last.col + len(last.text)))

    for toks in stmts:
        head = toks[0]
        word = head.text if head.kind == "name" else None
        if word == "vars":
            if names is not None:
                raise PopSyntaxError("variables declared twice", head.line, head.col)
            names = {}
            for t in toks[1:]:
                if t.kind != "name" or t.text in KEYWORDS:
                    raise PopSyntaxError(f"bad variable name {t.text!r}", t.line, t.col)
                if t.text in names:
                    raise PopSyntaxError(f"duplicate variable {t.text!r}", t.line, t.col)
                names[t.text] = len(names)
            if not names:
                raise PopSyntaxError("no variables declared", head.line, head.col)
            continue
        if names is None:
            raise PopSyntaxError("'vars' must come first", head.line, head.col)
        if word == "minimize":
            if objective is not None:
                raise PopSyntaxError("objective given twice", head.line, head.col)
            if len(toks) == 1:
                raise PopSyntaxError("missing objective", head.line, head.col + len(head.text))
            p = expr_parser(toks[1:])
            objective = p.expr()
            p.done()
            continue
        if word == "ball":
            if len(toks) != 2 or toks[1].kind != "num":
                raise PopSyntaxError("expected 'ball <radius>'", head.line, head.col)
            ball = float(toks[1].text)
            if not ball > 0:
                raise PopSyntaxError("ball radius must be positive", toks[1].line, toks[1].col)
            continue
        if word == "scale":
            rest = [t.text for t in toks[1:]]
            if rest not in ([], ["normalize"]):
                raise PopSyntaxError("expected 'scale' or 'scale normalize'", head.line, head.col)
            scale, normalize = True, bool(rest)
            continue
        if word == "st":
            in_st, toks = True, toks[1:]
        elif word == "subject" and len(toks) > 1 and toks[1].text == "to":
            in_st, toks = True, toks[2:]
        elif not in_st:
            raise PopSyntaxError(f"unexpected {head.text!r}", head.line, head.col)
        if not toks:
            continue
        cons.extend(_constraint(expr_parser(toks)))
    if names is None:
        raise PopSyntaxError("missing 'vars'", 1, 1)
    if objective is None:
        raise PopSyntaxError("missing 'minimize'", 1, 1)
    if scale and ball is None:
        raise PopSyntaxError("'scale' needs a 'ball' directive", 1, 1)
    return PopDocument(tuple(names), objective, tuple(cons), ball, scale, normalize)


def _constraint(p: _Parser) -> list[Polynomial]:
    start = p.peek()
    lhs = p.expr()
    rel = p.take()
    if rel.kind != "rel":
        p.error("expected '>=', '<=' or '='", rel)
    rhs = p.expr()
    p.done()
    g = lhs - rhs if rel.text == ">=" else rhs - lhs
    if g.is_zero():
        p.error("constraint is the zero polynomial", start)
    if rel.text in ("=", "=="):
        return [g, -g]
    return [g]


def parse_pop(text: str) -> Pop:
    """Parse problem text into a :class:`Pop` (ball directive applied)."""
    return parse_document(text).to_pop()


# ---------------------------------------------------------------------------
# printing


def _coef(c: float) -> str:
    return str(int(c)) if c.is_integer() and c < 1e15 else repr(c)


def format_polynomial(p: Polynomial, names) -> str:
    """Text form that :func:`parse_pop` reads back coefficient-for-coefficient."""
    if p.is_zero():
        return "0"
    parts = []
    for alpha, c in p.items():
        mono = "*".join(n if a == 1 else f"{n}^{a}" for n, a in zip(names, alpha) if a)
        mag = abs(c)
        if not mono:
            body = _coef(mag)
        elif mag == 1.0:
            body = mono
        else:
            body = f"{_coef(mag)}*{mono}"
        if not parts:
            parts.append(("-" if c < 0 else "") + body)
        else:
            parts.append(("- " if c < 0 else "+ ") + body)
    return " ".join(parts)


def print_pop(pop: Pop, scale: bool = False, normalize: bool = False) -> str:
    names = pop.variable_names
    cons = pop.constraints[:-1] if pop.ball_radius is not None else pop.constraints
    lines = ["vars " + " ".join(names), "minimize " + format_polynomial(pop.objective, names)]
    for i, g in enumerate(cons):
        lines.append(("st " if i == 0 else "   ") + format_polynomial(g, names) + " >= 0")
    if pop.ball_radius is not None:
        lines.append(f"ball {pop.ball_radius!r}")
        if scale:
            lines.append("scale normalize" if normalize else "scale")
    return "\n".join(lines) + "\n"
