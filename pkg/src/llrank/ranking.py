"""Explicit ranking functions into the ordinals below omega^omega.

A model of the existential constraint fixes every affine symbol and step
size of a template; from those we build the ranking function the template's
well-foundedness argument uses, evaluate it on concrete states, and check it
on a grid of relation pairs.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import total_ordering
from typing import Mapping, Optional, Sequence

from .loop import AffineExpr, DnfProgram, StateSpace, format_expr, format_rational
from .oracle import grid_pairs, has_successor
from .templates import AffineSymbol, RankingTemplate


class Ordering(enum.IntEnum):
    LT = -1
    EQ = 0
    GT = 1


@total_ordering
@dataclass(frozen=True)
class OrdinalValue:
    """Cantor normal form: ``(exponent, coefficient)`` pairs, exponents descending."""

    terms: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        exps = [e for e, _ in self.terms]
        if any(e < 0 for e in exps) or any(a <= b for a, b in zip(exps, exps[1:])):
            raise ValueError(f"exponents must be natural and strictly descending: {self.terms}")
        if any(c <= 0 for _, c in self.terms):
            raise ValueError(f"coefficients must be positive: {self.terms}")

    @classmethod
    def of(cls, coeffs: Mapping[int, int]) -> "OrdinalValue":
        """From an exponent -> coefficient map; zero coefficients are dropped."""
        return cls(tuple(sorted(((e, c) for e, c in coeffs.items() if c), reverse=True)))

    @classmethod
    def finite(cls, n: int) -> "OrdinalValue":
        return cls(((0, n),)) if n else cls()

    def __lt__(self, other: "OrdinalValue") -> bool:
        return ordinal_cmp(self, other) is Ordering.LT

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for e, c in self.terms:
            if e == 0:
                parts.append(str(c))
                continue
            base = "ω" if e == 1 else f"ω^{e}"
            parts.append(base if c == 1 else f"{base}·{c}")
        return " + ".join(parts)


def ordinal_cmp(a: OrdinalValue, b: OrdinalValue) -> Ordering:
    for (ea, ca), (eb, cb) in zip(a.terms, b.terms):
        if ea != eb:
            return Ordering.GT if ea > eb else Ordering.LT
        if ca != cb:
            return Ordering.GT if ca > cb else Ordering.LT
    if len(a.terms) == len(b.terms):
        return Ordering.EQ
    return Ordering.GT if len(a.terms) > len(b.terms) else Ordering.LT


@dataclass(frozen=True)
class ConcreteAffine:
    coeffs: tuple[Fraction, ...]
    constant: Fraction

    def __call__(self, x: Sequence) -> Fraction:
        return sum((c * Fraction(v) for c, v in zip(self.coeffs, x)), self.constant)

    def render(self, space: StateSpace) -> str:
        e = AffineExpr.make({(v, False): c for v, c in zip(space.names, self.coeffs)}, self.constant)
        return format_expr(e, space)


def ordinal_equiv(f: ConcreteAffine, delta: Fraction, x: Sequence) -> int:
    """ceil(f(x) / delta) when f(x) > 0, else 0."""
    if delta <= 0:
        raise ValueError(f"step size must be positive, got {delta}")
    v = f(x)
    return math.ceil(v / delta) if v > 0 else 0


# ---------------------------------------------------------------------------
# ranking functions


def _deltas(names: Sequence[str], values: Sequence[Fraction]) -> str:
    if len(set(values)) == 1:
        return " = ".join(names) + f" = {format_rational(values[0])}"
    return ", ".join(f"{n} = {format_rational(v)}" for n, v in zip(names, values))


def _fun(name: str, f: ConcreteAffine, space: StateSpace) -> str:
    return f"{name}({','.join(space.names)}) = {f.render(space)}"


@dataclass(frozen=True)
class PRFunction:
    space: StateSpace
    f: ConcreteAffine
    delta: Fraction
    kind = "pr"

    def evaluate(self, x) -> OrdinalValue:
        return OrdinalValue.finite(ordinal_equiv(self.f, self.delta, x))

    def render(self) -> str:
        return f"linear: {_fun('f', self.f, self.space)}, delta = {format_rational(self.delta)}"

    def components(self) -> dict:
        return {"f": self.f, "delta": self.delta}


@dataclass(frozen=True)
class MultiphaseFunction:
    space: StateSpace
    fs: tuple[ConcreteAffine, ...]
    deltas: tuple[Fraction, ...]
    kind = "multiphase"

    def phase(self, x) -> Optional[int]:
        """1-based index of the first positive component, if any."""
        for i, f in enumerate(self.fs, 1):
            if f(x) > 0:
                return i
        return None

    def evaluate(self, x) -> OrdinalValue:
        i = self.phase(x)
        if i is None:
            return OrdinalValue()
        k = len(self.fs)
        return OrdinalValue.of({1: k - i, 0: ordinal_equiv(self.fs[i - 1], self.deltas[i - 1], x)})

    def render(self) -> str:
        k = len(self.fs)
        funs = ", ".join(_fun(f"f{i}", f, self.space) for i, f in enumerate(self.fs, 1))
        return f"{k}-phase: {funs}, {_deltas([f'delta{i}' for i in range(1, k + 1)], self.deltas)}"

    def components(self) -> dict:
        return {"f": self.fs, "delta": self.deltas}


@dataclass(frozen=True)
class PiecewiseFunction:
    space: StateSpace
    fs: tuple[ConcreteAffine, ...]
    gs: tuple[ConcreteAffine, ...]
    delta: Fraction
    kind = "piecewise"

    def evaluate(self, x) -> Optional[OrdinalValue]:
        """Largest piece value among the pieces whose discriminator holds; None if none does."""
        vals = [ordinal_equiv(f, self.delta, x) for f, g in zip(self.fs, self.gs) if g(x) >= 0]
        if not vals:
            return None
        return OrdinalValue.finite(max(vals))

    def render(self) -> str:
        k = len(self.fs)
        funs = [_fun(f"f{i}", f, self.space) for i, f in enumerate(self.fs, 1)]
        funs += [_fun(f"g{i}", g, self.space) for i, g in enumerate(self.gs, 1)]
        return f"{k}-piece: {', '.join(funs)}, delta = {format_rational(self.delta)}"

    def components(self) -> dict:
        return {"f": self.fs, "g": self.gs, "delta": self.delta}


@dataclass(frozen=True)
class LexicographicFunction:
    space: StateSpace
    fs: tuple[ConcreteAffine, ...]
    deltas: tuple[Fraction, ...]
    kind = "lexicographic"

    def evaluate(self, x) -> OrdinalValue:
        k = len(self.fs)
        return OrdinalValue.of({k - i: ordinal_equiv(f, d, x) for i, (f, d) in enumerate(zip(self.fs, self.deltas), 1)})

    def render(self) -> str:
        k = len(self.fs)
        funs = ", ".join(_fun(f"f{i}", f, self.space) for i, f in enumerate(self.fs, 1))
        return f"{k}-lexicographic: {funs}, {_deltas([f'delta{i}' for i in range(1, k + 1)], self.deltas)}"

    def components(self) -> dict:
        return {"f": self.fs, "delta": self.deltas}


@dataclass(frozen=True)
class MultiphaseLexFunction:
    """Lexicographic tuple of multiphase components.

    Component ``i`` in phase ``p`` contributes ``w^(2(k-i)+1) * (l-p) + w^(2(k-i)) * f_ip^``,
    and nothing when none of its phases is active.
    """

    space: StateSpace
    fs: tuple[tuple[ConcreteAffine, ...], ...]
    deltas: tuple[tuple[Fraction, ...], ...]
    kind = "multiphase_lex"

    def evaluate(self, x) -> OrdinalValue:
        k = len(self.fs)
        coeffs: dict[int, int] = {}
        for i, (row, drow) in enumerate(zip(self.fs, self.deltas), 1):
            l = len(row)  # noqa: E741
            for p, (f, d) in enumerate(zip(row, drow), 1):
                if f(x) > 0:
                    coeffs[2 * (k - i) + 1] = l - p
                    coeffs[2 * (k - i)] = ordinal_equiv(f, d, x)
                    break
        return OrdinalValue.of(coeffs)

    def render(self) -> str:
        k, l = len(self.fs), len(self.fs[0])
        funs = ", ".join(
            _fun(f"f{i}_{j}", f, self.space) for i, row in enumerate(self.fs, 1) for j, f in enumerate(row, 1)
        )
        names = [f"delta{i}_{j}" for i in range(1, k + 1) for j in range(1, l + 1)]
        flat = [d for row in self.deltas for d in row]
        return f"{k}x{l}-phase-lexicographic: {funs}, {_deltas(names, flat)}"

    def components(self) -> dict:
        return {"f": self.fs, "delta": self.deltas}


RankingFunction = PRFunction | MultiphaseFunction | PiecewiseFunction | LexicographicFunction | MultiphaseLexFunction


def evaluate(r: RankingFunction, x: Sequence) -> Optional[OrdinalValue]:
    """Ordinal value of ``r`` at ``x``; None only for a piecewise function outside its pieces."""
    if len(x) != len(r.space):
        raise ValueError(f"state has dimension {len(x)}, expected {len(r.space)}")
    return r.evaluate(x)


# ---------------------------------------------------------------------------
# extraction


class ExtractionError(ValueError):
    pass


def _lookup(nu: Mapping[str, Fraction], name: str) -> Fraction:
    try:
        return Fraction(nu[name])
    except KeyError:
        raise ExtractionError(f"model has no value for {name}") from None


def _affine(nu, name: str, space: StateSpace) -> ConcreteAffine:
    sym = AffineSymbol(name)
    return ConcreteAffine(tuple(_lookup(nu, sym.slope(v)) for v in space.names), _lookup(nu, sym.offset))


def _delta(nu, name: str) -> Fraction:
    d = _lookup(nu, name)
    if d <= 0:
        raise ExtractionError(f"{name} = {d} is not positive; the constraint should have excluded this")
    return d


def extract(t: RankingTemplate, nu: Mapping[str, Fraction], space: StateSpace) -> RankingFunction:
    """Read the template's ranking function off a model."""
    rec = t.recipe
    if t.kind == "pr":
        return PRFunction(space, _affine(nu, rec["f"][0], space), _delta(nu, rec["delta"][0]))
    if t.kind in ("multiphase", "lexicographic"):
        cls = MultiphaseFunction if t.kind == "multiphase" else LexicographicFunction
        return cls(
            space,
            tuple(_affine(nu, f, space) for f in rec["f"]),
            tuple(_delta(nu, d) for d in rec["delta"]),
        )
    if t.kind == "piecewise":
        return PiecewiseFunction(
            space,
            tuple(_affine(nu, f, space) for f in rec["f"]),
            tuple(_affine(nu, g, space) for g in rec["g"]),
            _delta(nu, rec["delta"][0]),
        )
    if t.kind == "multiphase_lex":
        return MultiphaseLexFunction(
            space,
            tuple(tuple(_affine(nu, f, space) for f in row) for row in rec["f"]),
            tuple(tuple(_delta(nu, d) for d in row) for row in rec["delta"]),
        )
    raise ExtractionError(f"unknown template kind {t.kind!r}")


# ---------------------------------------------------------------------------
# certification


@dataclass
class CertReport:
    bound: int
    pairs_checked: int = 0
    violations: list = field(default_factory=list)  # (x, x', reason)

    @property
    def passed(self) -> bool:
        return not self.violations


def certify(r: RankingFunction, d: DnfProgram, bound: int) -> CertReport:
    """Check rho(x) > rho(x') on every integer relation pair in ``[-bound, bound]^2n``.

    An undefined value at ``x'`` is only a violation when ``x'`` itself has a
    successor in the relation.
    """
    if bound < 1:
        raise ValueError("bound must be >= 1")
    report = CertReport(bound)
    values: dict = {}
    successor: dict = {}

    def value(s):
        if s not in values:
            values[s] = evaluate(r, s)
        return values[s]

    for x, xp in grid_pairs(d, bound):
        report.pairs_checked += 1
        vx, vxp = value(x), value(xp)
        if vx is None:
            report.violations.append((x, xp, "ranking function undefined at x"))
            continue
        if vxp is None:
            if xp not in successor:
                successor[xp] = has_successor(d, xp)
            if successor[xp]:
                report.violations.append((x, xp, "ranking function undefined at x' which has a successor"))
            continue
        if ordinal_cmp(vx, vxp) is not Ordering.GT:
            report.violations.append((x, xp, f"no decrease: {vx} -> {vxp}"))
    return report
