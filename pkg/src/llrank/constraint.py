"""Existential arithmetic constraints over solver variables.

Terms are polynomials with exact rational coefficients, stored as a sorted
mapping from monomials (sorted tuples of variable names) to coefficients.
The constraints built by the Motzkin transformation never exceed degree two,
and every degree-two monomial pairs a multiplier with a template parameter.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Union

Monomial = tuple[str, ...]


@dataclass(frozen=True)
class Poly:
    terms: tuple[tuple[Monomial, Fraction], ...] = ()

    @classmethod
    def make(cls, terms: Mapping[Monomial, Fraction]) -> "Poly":
        return cls(tuple(sorted((tuple(sorted(m)), Fraction(c)) for m, c in terms.items() if c != 0)))

    @classmethod
    def const(cls, c) -> "Poly":
        return cls.make({(): Fraction(c)})

    @classmethod
    def var(cls, name: str, coeff=1) -> "Poly":
        return cls.make({(name,): Fraction(coeff)})

    @classmethod
    def sum(cls, polys: Iterable["Poly"]) -> "Poly":
        acc: dict[Monomial, Fraction] = {}
        for p in polys:
            for m, c in p.terms:
                acc[m] = acc.get(m, 0) + c
        return cls.make(acc)

    def as_dict(self) -> dict[Monomial, Fraction]:
        return dict(self.terms)

    def __add__(self, other: "Poly") -> "Poly":
        return Poly.sum((self, other))

    def __neg__(self) -> "Poly":
        return Poly(tuple((m, -c) for m, c in self.terms))

    def __sub__(self, other: "Poly") -> "Poly":
        return self + (-other)

    def scale(self, k) -> "Poly":
        k = Fraction(k)
        return Poly(tuple((m, c * k) for m, c in self.terms)) if k else Poly()

    def __mul__(self, other: "Poly") -> "Poly":
        acc: dict[Monomial, Fraction] = {}
        for m1, c1 in self.terms:
            for m2, c2 in other.terms:
                m = tuple(sorted(m1 + m2))
                acc[m] = acc.get(m, 0) + c1 * c2
        return Poly.make(acc)

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(not m for m, _ in self.terms)

    def constant(self) -> Fraction:
        return self.as_dict().get((), Fraction(0))

    def degree(self) -> int:
        return max((len(m) for m, _ in self.terms), default=0)

    def variables(self) -> set[str]:
        return {v for m, _ in self.terms for v in m}

    def substitute(self, values: Mapping[str, Fraction]) -> "Poly":
        acc: dict[Monomial, Fraction] = {}
        for m, c in self.terms:
            rest = []
            for v in m:
                if v in values:
                    c *= values[v]
                else:
                    rest.append(v)
            key = tuple(rest)
            acc[key] = acc.get(key, 0) + c
        return Poly.make(acc)


# comparison operators, each meaning "poly OP 0"
OPS = ("=", "<=", "<", ">=", ">")


def _holds(op: str, v: Fraction) -> bool:
    return {"=": v == 0, "<=": v <= 0, "<": v < 0, ">=": v >= 0, ">": v > 0}[op]


@dataclass(frozen=True)
class Cmp:
    poly: Poly
    op: str


@dataclass(frozen=True)
class Bool:
    value: bool


@dataclass(frozen=True)
class Conj:
    args: tuple["CFormula", ...]


@dataclass(frozen=True)
class Disj:
    args: tuple["CFormula", ...]


CFormula = Union[Cmp, Bool, Conj, Disj]

TRUE = Bool(True)
FALSE = Bool(False)


def cmp(poly: Poly, op: str) -> CFormula:
    """Comparison ``poly op 0``, folded to a constant when ground."""
    if op not in OPS:
        raise ValueError(f"unknown comparison {op!r}")
    if poly.is_constant():
        return Bool(_holds(op, poly.constant()))
    return Cmp(poly, op)


def conj(args: Iterable[CFormula]) -> CFormula:
    out = []
    for a in args:
        if isinstance(a, Bool):
            if not a.value:
                return FALSE
            continue
        out.extend(a.args if isinstance(a, Conj) else (a,))
    if not out:
        return TRUE
    return out[0] if len(out) == 1 else Conj(tuple(out))


def disj(args: Iterable[CFormula]) -> CFormula:
    out = []
    for a in args:
        if isinstance(a, Bool):
            if a.value:
                return TRUE
            continue
        out.extend(a.args if isinstance(a, Disj) else (a,))
    if not out:
        return FALSE
    return out[0] if len(out) == 1 else Disj(tuple(out))


def substitute(f: CFormula, values: Mapping[str, Fraction]) -> CFormula:
    """Bind some variables and constant-fold."""
    if isinstance(f, Bool):
        return f
    if isinstance(f, Cmp):
        return cmp(f.poly.substitute(values), f.op)
    if isinstance(f, Conj):
        return conj(substitute(a, values) for a in f.args)
    return disj(substitute(a, values) for a in f.args)


def evaluate(f: CFormula, values: Mapping[str, Fraction]) -> bool:
    """Exact truth value under a total assignment."""
    g = substitute(f, values)
    if not isinstance(g, Bool):
        missing = sorted(free_vars(g))
        raise KeyError(f"unbound variables: {', '.join(missing[:5])}")
    return g.value


def free_vars(f: CFormula) -> set[str]:
    if isinstance(f, Bool):
        return set()
    if isinstance(f, Cmp):
        return f.poly.variables()
    out: set[str] = set()
    for a in f.args:
        out |= free_vars(a)
    return out


def iter_cmps(f: CFormula):
    if isinstance(f, Cmp):
        yield f
    elif isinstance(f, (Conj, Disj)):
        for a in f.args:
            yield from iter_cmps(a)


@dataclass(frozen=True)
class ExistsConstraint:
    """A closed existential constraint plus its declared variables.

    ``variables`` is the declaration order: template parameters, then the
    components of the affine symbols, then the multipliers in ``(i, j, r)``
    order.
    """

    formula: CFormula
    variables: tuple[str, ...]
    parameters: tuple[str, ...] = ()
    multipliers: tuple[str, ...] = ()
    systems: int = 0
    direct_clauses: int = 0

    def substitute(self, values: Mapping[str, Fraction]) -> "ExistsConstraint":
        keep = lambda names: tuple(v for v in names if v not in values)  # noqa: E731
        return ExistsConstraint(
            substitute(self.formula, values),
            keep(self.variables),
            keep(self.parameters),
            keep(self.multipliers),
            self.systems,
            self.direct_clauses,
        )
