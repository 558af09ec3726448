"""Linear ranking templates as CNF over parametric atoms.

Each atom has the shape::

    sum_f (alpha_f * f(x) + beta_f * f(x')) + sum_d gamma_d * d  REL 0,   REL in {>=, >}

where ``f`` ranges over affine symbols ``f(x) = s_f . x + t_f`` and ``d`` over
scalar parameters such as step sizes.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .constraint import Poly
from .loop import (
    DEFAULT_DNF_CAP,
    AffineExpr,
    And,
    Atom,
    BoolConst,
    Column,
    Formula,
    Or,
    Rel,
    StateSpace,
)


class TemplateError(ValueError):
    pass


@dataclass(frozen=True)
class AffineSymbol:
    name: str

    def slope(self, var: str) -> str:
        return f"s_{self.name}_{var}"

    @property
    def offset(self) -> str:
        return f"t_{self.name}"

    def components(self, space: StateSpace) -> tuple[str, ...]:
        """Solver variable names: one slope per state variable, then the offset."""
        return tuple(self.slope(v) for v in space.names) + (self.offset,)


@dataclass(frozen=True)
class TemplateAtom:
    funs: tuple[tuple[str, Fraction, Fraction], ...]  # (symbol, alpha, beta)
    params: tuple[tuple[str, Fraction], ...]  # (parameter, gamma)
    rel: Rel

    def __post_init__(self):
        if self.rel not in (Rel.GE, Rel.GT):
            raise TemplateError("template atoms use >= or > only")
        if not any(a or b for _, a, b in self.funs) and not any(g for _, g in self.params):
            raise TemplateError("template atom with all-zero coefficients")

    @property
    def state_free(self) -> bool:
        return not any(a or b for _, a, b in self.funs)

    def symbols(self) -> set[str]:
        return {f for f, a, b in self.funs if a or b}


def _atom(funs=(), params=(), rel=Rel.GT) -> TemplateAtom:
    merged: dict[str, list[Fraction]] = {}
    for name, a, b in funs:
        ab = merged.setdefault(name, [Fraction(0), Fraction(0)])
        ab[0] += a
        ab[1] += b
    return TemplateAtom(
        tuple((n, ab[0], ab[1]) for n, ab in merged.items() if ab[0] or ab[1]),
        tuple((n, Fraction(g)) for n, g in params if g),
        rel,
    )


# atom shorthands
def _positive(d: str) -> TemplateAtom:  # d > 0
    return _atom(params=[(d, 1)])


def _pos(f: str) -> TemplateAtom:  # f(x) > 0
    return _atom([(f, 1, 0)])


def _nonneg(g: str) -> TemplateAtom:  # g(x) >= 0
    return _atom([(g, 1, 0)], rel=Rel.GE)


def _neg(g: str, primed: bool = False) -> TemplateAtom:  # g(x) < 0, or g(x') < 0
    return _atom([(g, 0, -1) if primed else (g, -1, 0)])


def _dec(f: str, d: str, g: str | None = None) -> TemplateAtom:
    """f(x) - g(x') - d > 0, i.e. g(x') < f(x) - d (g defaults to f)."""
    return _atom([(f, 1, 0), (g or f, 0, -1)], [(d, -1)])


def _nonincr(f: str) -> TemplateAtom:  # f(x) - f(x') >= 0
    return _atom([(f, 1, -1)], rel=Rel.GE)


@dataclass(frozen=True)
class TemplateClause:
    literals: tuple[TemplateAtom, ...]

    def __post_init__(self):
        if not self.literals:
            raise TemplateError("empty template clause")

    @property
    def state_free(self) -> bool:
        return all(a.state_free for a in self.literals)


def _clause(*atoms: TemplateAtom) -> TemplateClause:
    seen = []
    for a in atoms:
        if a not in seen:
            seen.append(a)
    return TemplateClause(tuple(seen))


@dataclass(frozen=True)
class RankingTemplate:
    kind: str  # pr | multiphase | piecewise | lexicographic | multiphase_lex
    size: tuple[int, ...]
    params: tuple[str, ...]
    funs: tuple[AffineSymbol, ...]
    clauses: tuple[TemplateClause, ...]
    # how the ranking module reads a model back: role -> ordered names
    recipe: Mapping[str, tuple] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        declared_p = set(self.params)
        declared_f = {f.name for f in self.funs}
        for c in self.clauses:
            for a in c.literals:
                for f, _, _ in a.funs:
                    if f not in declared_f:
                        raise TemplateError(f"undeclared affine symbol {f}")
                for d, _ in a.params:
                    if d not in declared_p:
                        raise TemplateError(f"undeclared parameter {d}")

    @property
    def label(self) -> str:
        if self.kind == "pr":
            return "pr"
        short = {"multiphase": "phase", "piecewise": "piece", "lexicographic": "lex", "multiphase_lex": "phaselex"}
        return f"{short[self.kind]}:{'x'.join(map(str, self.size))}"

    def solver_parameters(self, space: StateSpace) -> tuple[str, ...]:
        """Scalar parameters followed by every symbol component."""
        out = list(self.params)
        for f in self.funs:
            out.extend(f.components(space))
        return tuple(out)


def pr_template() -> RankingTemplate:
    """delta > 0 and f(x) > 0 and f(x') < f(x) - delta."""
    return RankingTemplate(
        "pr",
        (),
        ("delta",),
        (AffineSymbol("f"),),
        (_clause(_positive("delta")), _clause(_pos("f")), _clause(_dec("f", "delta"))),
        {"f": ("f",), "delta": ("delta",)},
    )


def _check_size(k: int, what: str = "k") -> None:
    if not isinstance(k, int) or k < 1:
        raise TemplateError(f"{what} must be a positive integer, got {k!r}")


def multiphase(k: int) -> RankingTemplate:
    _check_size(k)
    fs = [f"f{i}" for i in range(1, k + 1)]
    ds = [f"delta{i}" for i in range(1, k + 1)]
    clauses = [_clause(_positive(d)) for d in ds]
    clauses.append(_clause(*(_pos(f) for f in fs)))
    clauses.append(_clause(_dec(fs[0], ds[0])))
    for i in range(1, k):
        clauses.append(_clause(_dec(fs[i], ds[i]), _pos(fs[i - 1])))
    return RankingTemplate(
        "multiphase",
        (k,),
        tuple(ds),
        tuple(map(AffineSymbol, fs)),
        tuple(clauses),
        {"f": tuple(fs), "delta": tuple(ds)},
    )


def piecewise(k: int) -> RankingTemplate:
    _check_size(k)
    fs = [f"f{i}" for i in range(1, k + 1)]
    gs = [f"g{i}" for i in range(1, k + 1)]
    clauses = [_clause(_positive("delta"))]
    for i in range(k):
        for j in range(k):
            clauses.append(_clause(_neg(gs[i]), _neg(gs[j], primed=True), _dec(fs[i], "delta", fs[j])))
    clauses.extend(_clause(_pos(f)) for f in fs)
    clauses.append(_clause(*(_nonneg(g) for g in gs)))
    return RankingTemplate(
        "piecewise",
        (k,),
        ("delta",),
        tuple(map(AffineSymbol, fs + gs)),
        tuple(clauses),
        {"f": tuple(fs), "g": tuple(gs), "delta": ("delta",)},
    )


def lexicographic(k: int) -> RankingTemplate:
    _check_size(k)
    fs = [f"f{i}" for i in range(1, k + 1)]
    ds = [f"delta{i}" for i in range(1, k + 1)]
    clauses = [_clause(_positive(d)) for d in ds]
    clauses.extend(_clause(_pos(f)) for f in fs)
    for i in range(k - 1):
        clauses.append(_clause(_nonincr(fs[i]), *(_dec(fs[j], ds[j]) for j in range(i))))
    clauses.append(_clause(*(_dec(f, d) for f, d in zip(fs, ds))))
    return RankingTemplate(
        "lexicographic",
        (k,),
        tuple(ds),
        tuple(map(AffineSymbol, fs)),
        tuple(clauses),
        {"f": tuple(fs), "delta": tuple(ds)},
    )


def _or_of_cnfs(cnfs: list[list[tuple[TemplateAtom, ...]]], cap: int) -> list[tuple[TemplateAtom, ...]]:
    """CNF of a disjunction of CNFs, by distribution."""
    total = 1
    for c in cnfs:
        total *= len(c)
        if total > cap:
            raise TemplateError(f"template CNF exceeds {cap} clauses")
    return [tuple(itertools.chain.from_iterable(pick)) for pick in itertools.product(*cnfs)]


def multiphase_lex(k: int, l: int, cap: int = DEFAULT_DNF_CAP) -> RankingTemplate:  # noqa: E741
    """k lexicographic components, each an l-phase function."""
    _check_size(k)
    _check_size(l, "l")
    f = [[f"f{i}_{j}" for j in range(1, l + 1)] for i in range(1, k + 1)]
    d = [[f"delta{i}_{j}" for j in range(1, l + 1)] for i in range(1, k + 1)]

    def nonincreasing(i):  # component i does not go up (as a multiphase function)
        cnf = [(_nonincr(f[i][0]),)]
        cnf += [(_nonincr(f[i][j]), _pos(f[i][j - 1])) for j in range(1, l)]
        return cnf

    def decreasing(i):  # component i goes down by its step sizes
        cnf = [(_dec(f[i][0], d[i][0]),)]
        cnf += [(_dec(f[i][j], d[i][j]), _pos(f[i][j - 1])) for j in range(1, l)]
        return cnf

    clauses = [_clause(_positive(dij)) for row in d for dij in row]
    clauses += [_clause(*(_pos(fij) for fij in row)) for row in f]
    for i in range(k - 1):
        parts = [nonincreasing(i)] + [decreasing(t) for t in range(i)]
        clauses += [_clause(*lits) for lits in _or_of_cnfs(parts, cap)]
    clauses += [_clause(*lits) for lits in _or_of_cnfs([decreasing(i) for i in range(k)], cap)]
    if len(clauses) > cap:
        raise TemplateError(f"template CNF exceeds {cap} clauses")
    return RankingTemplate(
        "multiphase_lex",
        (k, l),
        tuple(x for row in d for x in row),
        tuple(AffineSymbol(x) for row in f for x in row),
        tuple(clauses),
        {"f": tuple(map(tuple, f)), "delta": tuple(map(tuple, d))},
    )


# ---------------------------------------------------------------------------
# expansion and instantiation


def expand_atom(atom: TemplateAtom, space: StateSpace) -> tuple[dict[Column, Poly], Poly]:
    """Write the atom's left-hand side as ``sum_col coeff[col] * col + const``.

    Coefficients and constant are linear polynomials in the solver parameters.
    """
    coeffs: dict[Column, Poly] = {}
    const = Poly.sum(Poly.var(p, g) for p, g in atom.params)
    for name, alpha, beta in atom.funs:
        sym = AffineSymbol(name)
        for v in space.names:
            for primed, w in ((False, alpha), (True, beta)):
                if w:
                    coeffs[(v, primed)] = coeffs.get((v, primed), Poly()) + Poly.var(sym.slope(v), w)
        const = const + Poly.var(sym.offset, alpha + beta)
    return {c: p for c, p in coeffs.items() if not p.is_zero()}, const


def _ground(p: Poly, nu: Mapping[str, Fraction]) -> Fraction:
    q = p.substitute(nu)
    if not q.is_constant():
        raise KeyError(f"no assignment for {', '.join(sorted(q.variables()))}")
    return q.constant()


def instantiate(t: RankingTemplate, nu: Mapping[str, Fraction], space: StateSpace) -> Formula:
    """Replace every parameter by its value; the result is a loop formula over (x, x')."""
    clauses = []
    for c in t.clauses:
        lits = []
        for a in c.literals:
            coeffs, const = expand_atom(a, space)
            e = AffineExpr.make({col: _ground(p, nu) for col, p in coeffs.items()}, _ground(const, nu))
            if e.is_constant():
                value = e.constant > 0 if a.rel is Rel.GT else e.constant >= 0
                lits.append(BoolConst(value))
            else:
                lits.append(Atom(e, a.rel))
        clauses.append(lits[0] if len(lits) == 1 else Or(tuple(lits)))
    return clauses[0] if len(clauses) == 1 else And(tuple(clauses))


# ---------------------------------------------------------------------------
# specifier strings

_SPEC_RE = re.compile(r"^(pr|phase|piece|lex|phaselex)(?::(\d+)(?:\.\.(\d+))?(?:x(\d+))?)?$")


def parse_template_specs(text: str) -> list[tuple[str, RankingTemplate]]:
    """Expand ``"pr,phase:2..3,phaselex:2x2"`` into labelled templates."""
    out = []
    for raw in text.split(","):
        spec = raw.strip()
        if not spec:
            continue
        m = _SPEC_RE.match(spec)
        if not m:
            raise TemplateError(f"bad template specifier {spec!r}")
        kind, lo, hi, l = m.groups()
        if kind == "pr":
            if lo:
                raise TemplateError(f"'pr' takes no size: {spec!r}")
            out.append(("pr", pr_template()))
            continue
        if lo is None:
            raise TemplateError(f"{kind!r} needs a size, e.g. {kind}:2")
        if (kind == "phaselex") != (l is not None):
            raise TemplateError(f"bad size in {spec!r}")
        lo_k = int(lo)
        hi_k = int(hi) if hi else lo_k
        if hi_k < lo_k:
            raise TemplateError(f"empty range in {spec!r}")
        for k in range(lo_k, hi_k + 1):
            if kind == "phase":
                out.append((f"phase:{k}", multiphase(k)))
            elif kind == "piece":
                out.append((f"piece:{k}", piecewise(k)))
            elif kind == "lex":
                out.append((f"lex:{k}", lexicographic(k)))
            else:
                out.append((f"phaselex:{k}x{l}", multiphase_lex(k, int(l))))
    if not out:
        raise TemplateError("no templates given")
    return out


DEFAULT_POOL = "pr,phase:2,phase:3,piece:2,lex:2,lex:3,phaselex:2x2"
