"""Linear loop programs: exact affine expressions, formulas, parsing and DNF.

A loop program is a relation ``T(x, x')`` written as a boolean combination of
affine (in)equalities over the declared variables and their primed copies.
Every number is a :class:`fractions.Fraction`; nothing in here touches floats.
"""

from __future__ import annotations

import enum
import itertools
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Mapping, Union

__all__ = [
    "Column",
    "StateSpace",
    "AffineExpr",
    "Rel",
    "Atom",
    "BoolConst",
    "TRUE",
    "FALSE",
    "And",
    "Or",
    "Not",
    "Formula",
    "Polyhedron",
    "DnfProgram",
    "ParseError",
    "DnfBlowupError",
    "parse_program",
    "load_program",
    "to_nnf",
    "to_dnf",
    "eval_formula",
    "format_program",
    "format_formula",
    "format_expr",
    "DEFAULT_DNF_CAP",
]

# (variable name, primed?) identifies one coordinate of (x; x')
Column = tuple[str, bool]

DEFAULT_DNF_CAP = 4096


@dataclass(frozen=True)
class StateSpace:
    names: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ValueError(f"duplicate variable in {self.names}")

    def __len__(self):
        return len(self.names)

    def columns(self) -> tuple[Column, ...]:
        """All 2n coordinates: unprimed variables first, then primed ones."""
        return tuple((v, False) for v in self.names) + tuple((v, True) for v in self.names)

    def index(self, name: str) -> int:
        return self.names.index(name)


@dataclass(frozen=True)
class AffineExpr:
    """``sum(c * col) + constant`` with zero coefficients dropped.

    ``coeffs`` is a sorted tuple of ``(column, Fraction)`` pairs so that
    structurally equal expressions compare and hash equal.
    """

    coeffs: tuple[tuple[Column, Fraction], ...] = ()
    constant: Fraction = Fraction(0)

    @classmethod
    def make(cls, coeffs: Mapping[Column, Fraction] | None = None, constant=0) -> "AffineExpr":
        items = tuple(sorted((k, Fraction(v)) for k, v in (coeffs or {}).items() if v != 0))
        return cls(items, Fraction(constant))

    @classmethod
    def var(cls, name: str, primed: bool = False) -> "AffineExpr":
        return cls((((name, primed), Fraction(1)),), Fraction(0))

    def as_dict(self) -> dict[Column, Fraction]:
        return dict(self.coeffs)

    def coeff(self, name: str, primed: bool = False) -> Fraction:
        return self.as_dict().get((name, primed), Fraction(0))

    def is_constant(self) -> bool:
        return not self.coeffs

    def __add__(self, other: "AffineExpr") -> "AffineExpr":
        d = self.as_dict()
        for k, v in other.coeffs:
            d[k] = d.get(k, 0) + v
        return AffineExpr.make(d, self.constant + other.constant)

    def __neg__(self) -> "AffineExpr":
        return AffineExpr(tuple((k, -v) for k, v in self.coeffs), -self.constant)

    def __sub__(self, other: "AffineExpr") -> "AffineExpr":
        return self + (-other)

    def scale(self, c) -> "AffineExpr":
        c = Fraction(c)
        if c == 0:
            return AffineExpr()
        return AffineExpr(tuple((k, v * c) for k, v in self.coeffs), self.constant * c)

    def evaluate(self, point: Mapping[str, Fraction], primed: Mapping[str, Fraction]) -> Fraction:
        total = self.constant
        for (name, is_primed), c in self.coeffs:
            src = primed if is_primed else point
            try:
                total += c * src[name]
            except KeyError:
                raise KeyError(f"no value bound for {name}{chr(39) if is_primed else ''}") from None
        return total

    def variables(self) -> set[Column]:
        return {k for k, _ in self.coeffs}


class Rel(enum.Enum):
    LE = "<="
    LT = "<"
    GE = ">="
    GT = ">"
    EQ = "=="
    NEQ = "!="


@dataclass(frozen=True)
class Atom:
    """``expr rel 0``."""

    expr: AffineExpr
    rel: Rel


@dataclass(frozen=True)
class BoolConst:
    value: bool


TRUE = BoolConst(True)
FALSE = BoolConst(False)


@dataclass(frozen=True)
class And:
    args: tuple["Formula", ...]

    def __post_init__(self):
        if not self.args:
            raise ValueError("And needs at least one child")


@dataclass(frozen=True)
class Or:
    args: tuple["Formula", ...]

    def __post_init__(self):
        if not self.args:
            raise ValueError("Or needs at least one child")


@dataclass(frozen=True)
class Not:
    arg: "Formula"


Formula = Union[Atom, BoolConst, And, Or, Not]


@dataclass(frozen=True)
class Polyhedron:
    """Conjunction of rows ``e <= 0`` (nonstrict) and ``e < 0`` (strict)."""

    nonstrict: tuple[AffineExpr, ...] = ()
    strict: tuple[AffineExpr, ...] = ()

    def contains(self, point, primed) -> bool:
        return all(e.evaluate(point, primed) <= 0 for e in self.nonstrict) and all(
            e.evaluate(point, primed) < 0 for e in self.strict
        )


@dataclass(frozen=True)
class DnfProgram:
    space: StateSpace
    disjuncts: tuple[Polyhedron, ...]
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if not self.disjuncts:
            raise ValueError("a DNF program needs at least one disjunct")

    @property
    def conjunctive(self) -> bool:
        return len(self.disjuncts) == 1

    def contains(self, point, primed) -> bool:
        return any(p.contains(point, primed) for p in self.disjuncts)


class ParseError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column


class DnfBlowupError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# parsing

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<op><=|>=|==|!=|&&|\|\||[<>!()+\-*/;,'])
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), line, pos - line_start + 1))
        for i, ch in enumerate(m.group()):
            if ch == "\n":
                line += 1
                line_start = pos + i + 1
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


_RELS = {r.value: r for r in Rel}


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0
        self.declared: tuple[str, ...] = ()

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def error(self, msg: str, tok: _Tok | None = None):
        tok = tok or self.peek()
        return ParseError(msg, tok.line, tok.col)

    def expect(self, text: str) -> _Tok:
        tok = self.next()
        if tok.text != text or tok.kind not in ("op", "ident"):
            raise self.error(f"expected {text!r}, found {tok.text or 'end of input'!r}", tok)
        return tok

    def file(self) -> tuple[StateSpace, Formula]:
        self.expect("vars")
        names = [self.ident()]
        while self.peek().text == ",":
            self.next()
            names.append(self.ident())
        self.expect(";")
        dup = [n for n in names if names.count(n) > 1]
        if dup:
            raise self.error(f"variable {dup[0]!r} declared twice", self.toks[0])
        self.declared = tuple(names)
        self.expect("loop")
        self.expect("(")
        body = self.formula()
        self.expect(")")
        self.expect(";")
        if self.peek().kind != "eof":
            raise self.error(f"trailing input {self.peek().text!r}")
        return StateSpace(tuple(names)), body

    def ident(self) -> str:
        tok = self.next()
        if tok.kind != "ident":
            raise self.error(f"expected identifier, found {tok.text or 'end of input'!r}", tok)
        return tok.text

    def formula(self) -> Formula:
        parts = [self.conj()]
        while self.peek().text == "||":
            self.next()
            parts.append(self.conj())
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def conj(self) -> Formula:
        parts = [self.unit()]
        while self.peek().text == "&&":
            self.next()
            parts.append(self.unit())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def unit(self) -> Formula:
        tok = self.peek()
        if tok.text == "!":
            self.next()
            return Not(self.unit())
        if tok.text == "(":
            # "(" may open a nested formula; atoms never start with "(".
            self.next()
            inner = self.formula()
            self.expect(")")
            return inner
        return self.atom()

    def atom(self) -> Atom:
        lhs = self.expr()
        tok = self.next()
        if tok.text not in _RELS:
            raise self.error(f"expected comparison operator, found {tok.text or 'end of input'!r}", tok)
        rhs = self.expr()
        return Atom(lhs - rhs, _RELS[tok.text])

    def expr(self) -> AffineExpr:
        sign = 1
        if self.peek().text == "-":
            self.next()
            sign = -1
        total = self.term(sign)
        while self.peek().text in ("+", "-"):
            sign = 1 if self.next().text == "+" else -1
            total = total + self.term(sign)
        return total

    def term(self, sign: int) -> AffineExpr:
        tok = self.peek()
        if tok.kind == "ident":
            return self.var().scale(sign)
        if tok.text == "-" or tok.kind == "int":
            lit = self.literal() * sign
            if self.peek().text == "*":
                self.next()
                return self.var().scale(lit)
            return AffineExpr.make({}, lit)
        raise self.error(f"expected a term, found {tok.text or 'end of input'!r}")

    def literal(self) -> Fraction:
        neg = False
        if self.peek().text == "-":
            self.next()
            neg = True
        tok = self.next()
        if tok.kind != "int":
            raise self.error(f"expected a number, found {tok.text or 'end of input'!r}", tok)
        num = int(tok.text)
        den = 1
        if self.peek().text == "/":
            self.next()
            dtok = self.next()
            if dtok.kind != "int":
                raise self.error("expected a positive integer denominator", dtok)
            den = int(dtok.text)
            if den == 0:
                raise self.error("zero denominator", dtok)
        value = Fraction(num, den)
        return -value if neg else value

    def var(self) -> AffineExpr:
        tok = self.next()
        if tok.kind != "ident":
            raise self.error(f"expected a variable, found {tok.text!r}", tok)
        primed = False
        if self.peek().text == "'":
            self.next()
            primed = True
        if tok.text not in self.declared:
            raise self.error(f"undeclared variable {tok.text!r}", tok)
        return AffineExpr.var(tok.text, primed)


def parse_program(text: str) -> tuple[StateSpace, Formula]:
    """Parse ``.llp`` source into its state space and loop formula."""
    return _Parser(text).file()


def load_program(path, cap: int = DEFAULT_DNF_CAP) -> DnfProgram:
    """Read, parse and normalize a program file."""
    from pathlib import Path

    path = Path(path)
    space, formula = parse_program(path.read_text(encoding="utf-8"))
    dnf = to_dnf(to_nnf(formula), space, cap=cap)
    return DnfProgram(space, dnf.disjuncts, name=path.stem)


# ---------------------------------------------------------------------------
# normal forms


def to_nnf(f: Formula, negate: bool = False) -> Formula:
    """Push negations to the leaves; only LE/LT atoms survive."""
    if isinstance(f, BoolConst):
        return BoolConst(f.value != negate)
    if isinstance(f, Not):
        return to_nnf(f.arg, not negate)
    if isinstance(f, (And, Or)):
        args = tuple(to_nnf(a, negate) for a in f.args)
        flip = isinstance(f, And) == negate
        return Or(args) if flip else And(args)
    e, rel = f.expr, f.rel
    if negate:
        rel = {
            Rel.LE: Rel.GT,
            Rel.LT: Rel.GE,
            Rel.GE: Rel.LT,
            Rel.GT: Rel.LE,
            Rel.EQ: Rel.NEQ,
            Rel.NEQ: Rel.EQ,
        }[rel]
    if rel in (Rel.LE, Rel.LT):
        return Atom(e, rel)
    if rel is Rel.GE:
        return Atom(-e, Rel.LE)
    if rel is Rel.GT:
        return Atom(-e, Rel.LT)
    if rel is Rel.EQ:
        return And((Atom(e, Rel.LE), Atom(-e, Rel.LE)))
    return Or((Atom(e, Rel.LT), Atom(-e, Rel.LT)))


def _dnf_clauses(f: Formula, cap: int) -> list[tuple[tuple[AffineExpr, ...], tuple[AffineExpr, ...]]]:
    if isinstance(f, BoolConst):
        return [((), ())] if f.value else []
    if isinstance(f, Atom):
        if f.rel is Rel.LE:
            return [((f.expr,), ())]
        if f.rel is Rel.LT:
            return [((), (f.expr,))]
        raise ValueError(f"formula is not in NNF: {f.rel}")
    if isinstance(f, Or):
        out = []
        for a in f.args:
            out.extend(_dnf_clauses(a, cap))
            if len(out) > cap:
                raise DnfBlowupError(f"DNF exceeds {cap} disjuncts")
        return out
    if isinstance(f, And):
        out = [((), ())]
        for a in f.args:
            sub = _dnf_clauses(a, cap)
            if len(out) * len(sub) > cap:
                raise DnfBlowupError(f"DNF exceeds {cap} disjuncts")
            out = [(l1 + l2, s1 + s2) for (l1, s1), (l2, s2) in itertools.product(out, sub)]
        return out
    raise ValueError("formula is not in NNF: found Not")


def to_dnf(f: Formula, space: StateSpace, cap: int = DEFAULT_DNF_CAP) -> DnfProgram:
    """Distribute an NNF formula into a union of polyhedra."""
    clauses = _dnf_clauses(f, cap)
    if not clauses:
        # unsatisfiable body: keep a single empty polyhedron "0 < 0"
        return DnfProgram(space, (Polyhedron((), (AffineExpr(),)),))
    for nonstrict, strict in clauses:
        for e in nonstrict + strict:
            for name, _ in e.variables():
                if name not in space.names:
                    raise ValueError(f"variable {name!r} is not in the state space")
    return DnfProgram(space, tuple(Polyhedron(ns, st) for ns, st in clauses))


# ---------------------------------------------------------------------------
# semantics


def eval_formula(f: Formula, point: Mapping[str, Fraction], primed: Mapping[str, Fraction]) -> bool:
    if isinstance(f, BoolConst):
        return f.value
    if isinstance(f, Not):
        return not eval_formula(f.arg, point, primed)
    if isinstance(f, And):
        return all(eval_formula(a, point, primed) for a in f.args)
    if isinstance(f, Or):
        return any(eval_formula(a, point, primed) for a in f.args)
    v = f.expr.evaluate(point, primed)
    return {
        Rel.LE: v <= 0,
        Rel.LT: v < 0,
        Rel.GE: v >= 0,
        Rel.GT: v > 0,
        Rel.EQ: v == 0,
        Rel.NEQ: v != 0,
    }[f.rel]


def iter_atoms(f: Formula) -> Iterator[Atom]:
    if isinstance(f, Atom):
        yield f
    elif isinstance(f, Not):
        yield from iter_atoms(f.arg)
    elif isinstance(f, (And, Or)):
        for a in f.args:
            yield from iter_atoms(a)


# ---------------------------------------------------------------------------
# printing


def format_rational(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def _col_order(space: StateSpace | None, col: Column):
    name, primed = col
    idx = space.names.index(name) if space and name in space.names else 0
    return (primed, idx, name)


def format_expr(e: AffineExpr, space: StateSpace | None = None, with_constant: bool = True) -> str:
    """Render like ``-y + 1`` or ``q' - q + y``."""
    parts: list[tuple[int, str]] = []
    for (name, primed), c in sorted(e.coeffs, key=lambda kv: _col_order(space, kv[0])):
        label = name + ("'" if primed else "")
        mag = abs(c)
        body = label if mag == 1 else f"{format_rational(mag)}*{label}"
        parts.append((-1 if c < 0 else 1, body))
    if with_constant and (e.constant != 0 or not parts):
        parts.append((-1 if e.constant < 0 else 1, format_rational(abs(e.constant))))
    out = ""
    for i, (sign, body) in enumerate(parts):
        if i == 0:
            out = ("-" if sign < 0 else "") + body
        else:
            out += (" - " if sign < 0 else " + ") + body
    return out


def _format_atom(a: Atom, space) -> str:
    lhs = AffineExpr(a.expr.coeffs, Fraction(0))
    if not lhs.coeffs:
        return f"{format_rational(a.expr.constant)} {a.rel.value} 0"
    return f"{format_expr(lhs, space)} {a.rel.value} {format_rational(-a.expr.constant)}"


def format_formula(f: Formula, space: StateSpace | None = None) -> str:
    if isinstance(f, BoolConst):
        return "0 <= 0" if f.value else "0 < 0"
    if isinstance(f, Atom):
        return _format_atom(f, space)
    if isinstance(f, Not):
        return "!(" + format_formula(f.arg, space) + ")"
    sep = " && " if isinstance(f, And) else " || "
    return sep.join(
        "(" + format_formula(a, space) + ")" if isinstance(a, (And, Or)) else format_formula(a, space) for a in f.args
    )


def format_program(space: StateSpace, f: Formula) -> str:
    return f"vars {', '.join(space.names)};\nloop ({format_formula(f, space)});\n"


def format_polyhedron(p: Polyhedron, space: StateSpace | None = None) -> str:
    rows = [_format_atom(Atom(e, Rel.LE), space) for e in p.nonstrict]
    rows += [_format_atom(Atom(e, Rel.LT), space) for e in p.strict]
    return " && ".join(rows) if rows else "0 <= 0"


def relation_formula(d: DnfProgram) -> Formula:
    """The DNF back as a formula (used for membership checks)."""
    disj = []
    for p in d.disjuncts:
        atoms = [Atom(e, Rel.LE) for e in p.nonstrict] + [Atom(e, Rel.LT) for e in p.strict]
        disj.append(And(tuple(atoms)) if atoms else TRUE)
    return disj[0] if len(disj) == 1 else Or(tuple(disj))
