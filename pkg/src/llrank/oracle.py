"""Solver-free ground truth: exact Fourier-Motzkin and integer grid enumeration."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

from .loop import DnfProgram, Formula, Polyhedron, eval_formula

DEFAULT_ROW_CAP = 100_000

State = tuple[int, ...]


class OracleBlowupError(RuntimeError):
    pass


@dataclass(frozen=True)
class GroundRow:
    """``coeffs . x <= constant`` (``<`` when strict)."""

    coeffs: tuple[Fraction, ...]
    constant: Fraction
    strict: bool = False


@dataclass(frozen=True)
class GroundSystem:
    rows: tuple[GroundRow, ...]
    nvars: int

    def __post_init__(self):
        for r in self.rows:
            if len(r.coeffs) != self.nvars:
                raise ValueError(f"row has {len(r.coeffs)} coefficients, expected {self.nvars}")

    @classmethod
    def of(cls, rows, nvars: int | None = None) -> "GroundSystem":
        """Build from ``(coeffs, constant, strict)`` triples."""
        rows = [GroundRow(tuple(map(Fraction, c)), Fraction(b), bool(s)) for c, b, s in rows]
        if nvars is None:
            nvars = max((len(r.coeffs) for r in rows), default=0)
        return cls(tuple(rows), nvars)

    def satisfied_by(self, x: Sequence[Fraction]) -> bool:
        for r in self.rows:
            lhs = sum((c * v for c, v in zip(r.coeffs, x)), Fraction(0))
            if lhs > r.constant or (r.strict and lhs == r.constant):
                return False
        return True


def _normalize(r: GroundRow) -> GroundRow:
    # scale so the largest |coefficient| is 1; keeps duplicates detectable
    scale = max((abs(c) for c in r.coeffs), default=Fraction(0))
    if scale == 0:
        return r
    return GroundRow(tuple(c / scale for c in r.coeffs), r.constant / scale, r.strict)


def _ground_ok(r: GroundRow) -> bool:
    return r.constant > 0 if r.strict else r.constant >= 0


def fourier_motzkin_feasible(s: GroundSystem, cap: int = DEFAULT_ROW_CAP) -> bool:
    """True iff some rational point satisfies every row of ``s``."""
    rows = {_normalize(r) for r in s.rows}
    remaining = set(range(s.nvars))
    while remaining:
        if any(not any(r.coeffs) and not _ground_ok(r) for r in rows):
            return False

        # eliminate the variable producing the fewest combinations
        def cost(j):
            pos = sum(1 for r in rows if r.coeffs[j] > 0)
            neg = sum(1 for r in rows if r.coeffs[j] < 0)
            return pos * neg - pos - neg

        j = min(sorted(remaining), key=cost)
        remaining.discard(j)
        pos = [r for r in rows if r.coeffs[j] > 0]
        neg = [r for r in rows if r.coeffs[j] < 0]
        out = {r for r in rows if r.coeffs[j] == 0}
        for p in pos:
            for n in neg:
                a, b = -n.coeffs[j], p.coeffs[j]  # both > 0
                combined = GroundRow(
                    tuple(a * pc + b * nc for pc, nc in zip(p.coeffs, n.coeffs)),
                    a * p.constant + b * n.constant,
                    p.strict or n.strict,
                )
                out.add(_normalize(combined))
                if len(out) > cap:
                    raise OracleBlowupError(f"Fourier-Motzkin exceeded {cap} rows")
        rows = out
    return all(_ground_ok(r) for r in rows)


# ---------------------------------------------------------------------------
# relation sampling


def _int_rows(p: Polyhedron, space) -> list[tuple[tuple[int, ...], tuple[int, ...], int, bool]]:
    """Rows ``a.x + b.x' + c (<=|<) 0`` scaled to integer coefficients."""
    out = []
    for exprs, strict in ((p.nonstrict, False), (p.strict, True)):
        for e in exprs:
            d = e.as_dict()
            vals = [d.get((v, False), Fraction(0)) for v in space.names]
            vals += [d.get((v, True), Fraction(0)) for v in space.names]
            vals.append(e.constant)
            lcm = math.lcm(*(v.denominator for v in vals))
            ints = [int(v * lcm) for v in vals]
            n = len(space.names)
            out.append((tuple(ints[:n]), tuple(ints[n : 2 * n]), ints[-1], strict))
    return out


def _row_ok(value: int, strict: bool) -> bool:
    return value < 0 if strict else value <= 0


def grid_pairs(d: DnfProgram, bound: int) -> Iterator[tuple[State, State]]:
    """Integer pairs ``(x, x')`` in ``[-bound, bound]^2n`` that lie in the relation,
    in lexicographic order."""
    if bound < 1:
        raise ValueError("bound must be >= 1")
    n = len(d.space)
    axis = range(-bound, bound + 1)
    states = list(itertools.product(axis, repeat=n))
    disjuncts = [_int_rows(p, d.space) for p in d.disjuncts]
    for x in states:
        # per disjunct: rows still depending on x' with the x-part folded in
        live = []
        for rows in disjuncts:
            pending, ok = [], True
            for a, b, c, strict in rows:
                base = c + sum(ai * xi for ai, xi in zip(a, x))
                if any(b):
                    pending.append((b, base, strict))
                elif not _row_ok(base, strict):
                    ok = False
                    break
            if ok:
                live.append(pending)
        if not live:
            continue
        for xp in states:
            for pending in live:
                if all(_row_ok(base + sum(bi * vi for bi, vi in zip(b, xp)), strict) for b, base, strict in pending):
                    yield x, xp
                    break


def as_point(space, state: Sequence) -> dict[str, Fraction]:
    return {v: Fraction(s) for v, s in zip(space.names, state)}


def check_inclusion(inst: Formula, d: DnfProgram, bound: int) -> list[tuple[State, State]]:
    """Grid pairs of the loop relation on which ``inst`` is false."""
    bad = []
    for x, xp in grid_pairs(d, bound):
        if not eval_formula(inst, as_point(d.space, x), as_point(d.space, xp)):
            bad.append((x, xp))
    return bad


def has_successor(d: DnfProgram, x: Sequence) -> bool:
    """Whether some rational ``x'`` makes ``(x, x')`` a relation pair."""
    names = d.space.names
    point = as_point(d.space, x)
    for p in d.disjuncts:
        rows = []
        for exprs, strict in ((p.nonstrict, False), (p.strict, True)):
            for e in exprs:
                coeffs = e.as_dict()
                const = e.constant + sum((coeffs.get((v, False), Fraction(0)) * point[v] for v in names), Fraction(0))
                rows.append(([coeffs.get((v, True), Fraction(0)) for v in names], -const, strict))
        if fourier_motzkin_feasible(GroundSystem.of(rows, len(names))):
            return True
    return False


def polyhedron_system(p: Polyhedron, space) -> GroundSystem:
    """The polyhedron over the 2n coordinates (x; x') as a ground system."""
    cols = space.columns()
    rows = []
    for exprs, strict in ((p.nonstrict, False), (p.strict, True)):
        for e in exprs:
            coeffs = e.as_dict()
            rows.append(([coeffs.get(c, Fraction(0)) for c in cols], -e.constant, strict))
    return GroundSystem.of(rows, len(cols))


def rational_violations(d: DnfProgram, t, nu) -> list[tuple[int, int]]:
    """``(disjunct, clause)`` pairs where the instantiated template fails somewhere
    over the rationals, decided exactly by Fourier-Motzkin (no solver involved)."""
    from .motzkin import build_system
    from .templates import expand_atom

    bad = []
    for j, c in enumerate(t.clauses):
        if c.state_free:
            holds = False
            for a in c.literals:
                _, const = expand_atom(a, d.space)
                v = const.substitute(nu).constant()
                holds = holds or (v > 0 if a.rel.value == ">" else v >= 0)
            if not holds:
                bad.extend((i, j) for i in range(len(d.disjuncts)))
            continue
        for i, p in enumerate(d.disjuncts):
            s = build_system(p, c, d.space, i, j)
            rows = []
            for row in s.rows:
                coeffs = [_ground_value(row.coeff(col), nu) for col in s.columns]
                rows.append((coeffs, _ground_value(row.constant, nu), row.strict))
            if fourier_motzkin_feasible(GroundSystem.of(rows, len(s.columns))):
                bad.append((i, j))
    return bad


def _ground_value(p, nu) -> Fraction:
    q = p.substitute(nu)
    if not q.is_constant():
        raise KeyError(f"no value for {', '.join(sorted(q.variables()))}")
    return q.constant()
