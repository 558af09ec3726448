"""From "loop relation implies template" to an existential constraint.

For every loop disjunct ``i`` and every template clause ``j`` that mentions
the state, the implication ``P_i(x, x') -> C_j(x, x')`` is rewritten as the
infeasibility of ``P_i /\\ not C_j`` and then replaced by its Motzkin
certificate: nonnegative multipliers whose combination of the rows derives
``0 <= c`` with ``c < 0`` or ``0 < c`` with ``c <= 0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .constraint import (
    CFormula,
    ExistsConstraint,
    Poly,
    cmp,
    conj,
    disj,
)
from .loop import AffineExpr, Column, DnfProgram, Polyhedron, Rel, StateSpace
from .templates import RankingTemplate, TemplateAtom, TemplateClause, expand_atom

# A ParamLin is a Poly of degree <= 1 over template parameters.
ParamLin = Poly


@dataclass(frozen=True)
class MotzkinRow:
    """``sum_col coeffs[col] * col <= constant`` (``<`` when strict)."""

    coeffs: tuple[tuple[Column, ParamLin], ...]
    constant: ParamLin
    strict: bool

    def coeff(self, col: Column) -> ParamLin:
        return dict(self.coeffs).get(col, Poly())


@dataclass(frozen=True)
class MotzkinSystem:
    rows: tuple[MotzkinRow, ...]
    columns: tuple[Column, ...]
    origin_disjunct: int = 0
    origin_clause: int = 0

    def __post_init__(self):
        if not self.rows:
            raise ValueError("empty Motzkin system")


def _row(coeffs: dict[Column, ParamLin], constant: ParamLin, strict: bool) -> MotzkinRow:
    return MotzkinRow(
        tuple(sorted(((c, p) for c, p in coeffs.items() if not p.is_zero()), key=lambda cp: cp[0])), constant, strict
    )


def loop_row(e: AffineExpr, strict: bool) -> MotzkinRow:
    """Loop row ``e <= 0`` / ``e < 0`` as ``coeffs . (x;x') <= -const``."""
    return _row({col: Poly.const(c) for col, c in e.coeffs}, Poly.const(-e.constant), strict)


def negate_atom(a: TemplateAtom, space: StateSpace) -> MotzkinRow:
    """not(e >= 0) is e < 0 (strict); not(e > 0) is e <= 0 (nonstrict)."""
    coeffs, const = expand_atom(a, space)
    return _row(coeffs, -const, strict=a.rel is Rel.GE)


def build_system(p: Polyhedron, c: TemplateClause, space: StateSpace, i: int = 0, j: int = 0) -> MotzkinSystem:
    if c.state_free:
        raise ValueError("state-free clauses are asserted directly, not via Motzkin")
    rows = [loop_row(e, False) for e in p.nonstrict]
    rows += [loop_row(e, True) for e in p.strict]
    rows += [negate_atom(a, space) for a in c.literals]
    return MotzkinSystem(tuple(rows), space.columns(), i, j)


def apply_motzkin(s: MotzkinSystem, tag: str | None = None) -> ExistsConstraint:
    """Existential certificate that ``s`` has no rational solution."""
    tag = tag if tag is not None else f"{s.origin_disjunct}_{s.origin_clause}"
    names = [f"{'mu' if row.strict else 'lam'}_{tag}_{r}" for r, row in enumerate(s.rows)]
    mult = [Poly.var(n) for n in names]
    parts: list[CFormula] = [cmp(m, ">=") for m in mult]
    for col in s.columns:
        parts.append(cmp(Poly.sum(m * row.coeff(col) for m, row in zip(mult, s.rows)), "="))
    parts.append(cmp(Poly.sum(m * row.constant for m, row in zip(mult, s.rows)), "<="))
    nonstrict_b = Poly.sum(m * row.constant for m, row in zip(mult, s.rows) if not row.strict)
    mu_sum = Poly.sum(m for m, row in zip(mult, s.rows) if row.strict)
    parts.append(disj([cmp(nonstrict_b, "<"), cmp(mu_sum, ">")]))
    return ExistsConstraint(conj(parts), tuple(names), (), tuple(names), 1, 0)


def _direct_clause(c: TemplateClause, space: StateSpace) -> CFormula:
    lits = []
    for a in c.literals:
        _, const = expand_atom(a, space)
        lits.append(cmp(const, ">" if a.rel is Rel.GT else ">="))
    return disj(lits)


def generate_constraint(d: DnfProgram, t: RankingTemplate) -> ExistsConstraint:
    """The full existential constraint for "d is contained in some instance of t"."""
    parts: list[CFormula] = []
    multipliers: list[str] = []
    direct = systems = 0
    for c in t.clauses:
        if c.state_free:
            parts.append(_direct_clause(c, d.space))
            direct += 1
    for i, p in enumerate(d.disjuncts):
        for j, c in enumerate(t.clauses):
            if c.state_free:
                continue
            piece = apply_motzkin(build_system(p, c, d.space, i, j))
            parts.append(piece.formula)
            multipliers.extend(piece.multipliers)
            systems += 1
    params = t.solver_parameters(d.space)
    return ExistsConstraint(conj(parts), params + tuple(multipliers), params, tuple(multipliers), systems, direct)


def ground_system(rows) -> MotzkinSystem:
    """Parameter-free system from ``(coeffs, constant, strict)`` rows over x0, x1, ..."""
    rows = list(rows)
    m = max((len(c) for c, _, _ in rows), default=0)
    cols = tuple((f"x{k}", False) for k in range(m))
    out = []
    for coeffs, constant, strict in rows:
        out.append(
            _row(
                {cols[k]: Poly.const(Fraction(v)) for k, v in enumerate(coeffs)}, Poly.const(Fraction(constant)), strict
            )
        )
    return MotzkinSystem(tuple(out), cols)
