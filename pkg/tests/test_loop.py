import random
from fractions import Fraction

import pytest
from conftest import CORPUS, program

from llrank.cli import corpus_path
from llrank.loop import (
    AffineExpr,
    And,
    Atom,
    DnfBlowupError,
    Not,
    Or,
    ParseError,
    Rel,
    eval_formula,
    format_program,
    iter_atoms,
    parse_program,
    to_dnf,
    to_nnf,
)

FIG1 = "vars q, y; loop (q > 0 && q' == q - y && y' == y + 1);"


def pt(**kw):
    return {k: Fraction(v) for k, v in kw.items()}


def test_parse_simple_decrement():
    space, f = parse_program("vars q; loop (q > 0 && q' == q - 1);")
    assert space.names == ("q",)
    assert isinstance(f, And) and len(f.args) == 2
    guard, update = f.args
    assert guard.rel is Rel.GT and guard.expr == AffineExpr.var("q")
    assert update.rel is Rel.EQ
    assert update.expr == AffineExpr.var("q", True) - AffineExpr.var("q") + AffineExpr.make({}, 1)


def test_parse_fig1_three_atoms():
    space, f = parse_program(FIG1)
    assert space.names == ("q", "y")
    assert len(list(iter_atoms(f))) == 3


def test_parse_rational_literal():
    _, f = parse_program("vars q; loop (q > 0 && q' == q + 1/2);")
    update = f.args[1]
    assert update.expr.constant == Fraction(-1, 2)


def test_parse_coefficients_and_comments():
    _, f = parse_program("# c\nvars a, b;\nloop (2*a - 3/4*b <= -1); # tail\n")
    (atom,) = iter_atoms(f)
    assert atom.expr.coeff("a") == 2
    assert atom.expr.coeff("b") == Fraction(-3, 4)
    assert atom.expr.constant == 1


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("vars q; loop (q > 0 && r' == q);", "undeclared"),
        ("vars q; loop (q > 1/0);", "denominator"),
        ("vars q; loop (q > 0", "expected"),
        ("vars q, q; loop (q > 0);", "twice"),
    ],
)
def test_parse_errors(text, fragment):
    with pytest.raises(ParseError) as exc:
        parse_program(text)
    assert fragment in str(exc.value).lower()
    assert exc.value.line >= 1 and exc.value.column >= 1


def test_parse_error_position():
    with pytest.raises(ParseError) as exc:
        parse_program("vars q;\nloop (q >> 0);")
    assert exc.value.line == 2


def test_nnf_negated_le_becomes_strict():
    e = AffineExpr.var("q") - AffineExpr.make({}, 2)
    out = to_nnf(Not(Atom(e, Rel.LE)))
    assert out == Atom(-e, Rel.LT)


def test_nnf_equality_splits():
    e = AffineExpr.var("q")
    assert to_nnf(Atom(e, Rel.EQ)) == And((Atom(e, Rel.LE), Atom(-e, Rel.LE)))


def test_nnf_de_morgan():
    a, b = AffineExpr.var("q"), AffineExpr.var("y")
    out = to_nnf(Not(And((Atom(a, Rel.LE), Atom(b, Rel.LT)))))
    assert out == Or((Atom(-a, Rel.LT), Atom(-b, Rel.LE)))


def test_nnf_only_le_lt():
    _, f = parse_program("vars a, b; loop (!(a != b || a >= 1) && !(b > 2));")
    out = to_nnf(f)
    assert all(a.rel in (Rel.LE, Rel.LT) for a in iter_atoms(out))


def test_dnf_fig1_shape():
    d = program("fig1")
    assert d.conjunctive
    (p,) = d.disjuncts
    assert len(p.strict) == 1 and len(p.nonstrict) == 4
    assert p.strict[0] == -AffineExpr.var("q")


def test_dnf_twobranch_not_conjunctive():
    d = program("twobranch")
    assert len(d.disjuncts) == 2 and not d.conjunctive


def test_dnf_distributes():
    space, f = parse_program("vars a, b; loop ((a < 0 || a > 1) && (b < 0 || b > 1));")
    d = to_dnf(to_nnf(f), space)
    assert len(d.disjuncts) == 4


def test_dnf_cap():
    clauses = " && ".join(f"(a < {i} || b < {i})" for i in range(13))
    space, f = parse_program(f"vars a, b; loop ({clauses});")
    with pytest.raises(DnfBlowupError):
        to_dnf(to_nnf(f), space, cap=4096)


def test_eval_fig1():
    _, f = parse_program(FIG1)
    assert eval_formula(f, pt(q=1, y=0), pt(q=1, y=1))
    assert not eval_formula(f, pt(q=0, y=0), pt(q=0, y=1))
    _, g = parse_program("vars q; loop (q > 0);")
    assert eval_formula(g, pt(q=Fraction(1, 2)), pt(q=0))


def test_eval_missing_binding():
    _, f = parse_program(FIG1)
    with pytest.raises(KeyError):
        eval_formula(f, pt(q=1), pt(q=1, y=1))


@pytest.mark.parametrize("name", CORPUS)
def test_nnf_dnf_equivalence_random(name):
    space, f = parse_program(corpus_path(name).read_text())
    nnf = to_nnf(f)
    d = to_dnf(nnf, space)
    rng = random.Random(name)
    for _ in range(1000):
        x = {v: Fraction(rng.randint(-6, 6), rng.choice((1, 1, 2))) for v in space.names}
        # bias successors toward the update equations by reusing nearby values
        xp = {
            v: x[v] + Fraction(rng.randint(-3, 3)) if rng.random() < 0.7 else Fraction(rng.randint(-6, 6))
            for v in space.names
        }
        a = eval_formula(f, x, xp)
        assert a == eval_formula(nnf, x, xp) == d.contains(x, xp)


@pytest.mark.parametrize("name", CORPUS)
def test_pretty_print_fixed_point(name):
    once = format_program(*parse_program(corpus_path(name).read_text()))
    twice = format_program(*parse_program(once))
    assert once == twice
