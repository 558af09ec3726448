import random
from fractions import Fraction

import pytest
from conftest import affine

from llrank.loop import BoolConst, Rel, StateSpace, eval_formula, iter_atoms
from llrank.templates import (
    TemplateAtom,
    TemplateError,
    instantiate,
    lexicographic,
    multiphase,
    multiphase_lex,
    parse_template_specs,
    piecewise,
    pr_template,
)

SPACE = StateSpace(("q", "y"))


def test_pr_shape():
    t = pr_template()
    assert len(t.clauses) == 3
    assert [c.state_free for c in t.clauses] == [True, False, False]
    (dec,) = t.clauses[2].literals
    assert dec.funs == (("f", 1, -1),)
    assert dec.params == (("delta", -1),)
    assert dec.rel is Rel.GT


def test_multiphase_counts():
    assert len(multiphase(2).clauses) == 5
    for k in range(1, 5):
        assert len(multiphase(k).clauses) == 2 * k + 1
    t = multiphase(3)
    assert len(t.clauses[3].literals) == 3  # some phase is active


def test_piecewise_counts():
    t = piecewise(2)
    assert len(t.clauses) == 8
    assert t.clauses[-1].literals[0].rel is Rel.GE
    for c in t.clauses[1:5]:
        # x' only shows up through the discriminator and the ranking piece
        primed = {name for a in c.literals for name, _, beta in a.funs if beta}
        assert primed <= {"g1", "g2", "f1", "f2"}
        assert len(c.literals) == 3


def test_lexicographic_counts():
    t = lexicographic(3)
    assert len(t.clauses) == 9
    mixed = t.clauses[7]  # i = 2: f2 nonincreasing or f1 decreasing
    assert {a.rel for a in mixed.literals} == {Rel.GE, Rel.GT}
    assert {a.funs[0][0] for a in mixed.literals} == {"f1", "f2"}


@pytest.mark.parametrize("ctor", [multiphase, piecewise, lexicographic])
def test_size_zero_rejected(ctor):
    with pytest.raises(TemplateError):
        ctor(0)


def test_multiphase_lex_builds_and_guards():
    t = multiphase_lex(2, 2)
    assert len(t.params) == 4 and len(t.funs) == 4
    with pytest.raises(TemplateError):
        multiphase_lex(4, 4, cap=50)


def test_atoms_are_template_shaped():
    for t in (pr_template(), multiphase(3), piecewise(3), lexicographic(3), multiphase_lex(2, 3)):
        for c in t.clauses:
            for a in c.literals:
                assert a.rel in (Rel.GE, Rel.GT)
                assert any(x or y for _, x, y in a.funs) or any(g for _, g in a.params)


def test_atom_requires_nonzero():
    with pytest.raises(TemplateError):
        TemplateAtom((("f", 0, 0),), (), Rel.GT)
    with pytest.raises(TemplateError):
        TemplateAtom((), (("delta", 1),), Rel.LE)


def test_specs():
    labels = [s for s, _ in parse_template_specs("pr, phase:2..4 ,piece:2,lex:3,phaselex:2x2")]
    assert labels == ["pr", "phase:2", "phase:3", "phase:4", "piece:2", "lex:3", "phaselex:2x2"]
    for bad in ("", "phase", "phase:0", "pr:2", "phase:3..2", "phaselex:2", "spiral:2"):
        with pytest.raises(TemplateError):
            parse_template_specs(bad)


def test_instantiate_pr_example():
    nu = {"delta": Fraction(1, 2), **affine("f", ["q"], [1], 1)}
    space = StateSpace(("q",))
    inst = instantiate(pr_template(), nu, space)
    assert inst.args[0] == BoolConst(True)
    assert eval_formula(inst, {"q": Fraction(3)}, {"q": Fraction(2)})
    assert not eval_formula(inst, {"q": Fraction(3)}, {"q": Fraction(5, 2)})


def test_instantiate_all_zero_has_false_leaf():
    t = multiphase(2)
    nu = {v: Fraction(0) for v in t.solver_parameters(SPACE)}
    inst = instantiate(t, nu, SPACE)
    assert BoolConst(False) in inst.args


def test_instantiate_fig1_closed():
    t = multiphase(2)
    nu = {"delta1": Fraction(1, 2), "delta2": Fraction(1, 2)}
    nu |= affine("f1", SPACE.names, [0, -1], 1) | affine("f2", SPACE.names, [1, 0], 1)
    inst = instantiate(t, nu, SPACE)
    cols = {c for a in iter_atoms(inst) for c in a.expr.as_dict()}
    assert cols <= set(SPACE.columns())
    assert eval_formula(inst, {"q": 5, "y": -2}, {"q": 7, "y": -1})


def test_instantiate_missing_entry():
    with pytest.raises(KeyError):
        instantiate(pr_template(), {"delta": Fraction(1)}, SPACE)


# --- semantic equivalences, checked on random instances and points ---------


def _rand_nu(rng, t, rename=None):
    rename = rename or {}
    nu = {}
    for v in t.solver_parameters(SPACE):
        nu[v] = Fraction(rng.randint(-3, 3), rng.choice((1, 2)))
    for d in t.params:
        if rng.random() < 0.8:
            nu[d] = abs(nu[d]) + Fraction(1, 4)
    return nu


def _renamed(nu, mapping):
    out = {}
    for k, v in nu.items():
        for a, b in mapping.items():
            if k == a or k.startswith(f"s_{a}_") or k == f"t_{a}":
                k = k.replace(a, b, 1)
                break
        out[k] = v
    return out


def _rand_point(rng):
    return {v: Fraction(rng.randint(-4, 4)) for v in SPACE.names}


@pytest.mark.parametrize(
    "other, mapping",
    [
        (multiphase(1), {"f1": "f", "delta1": "delta"}),
        (lexicographic(1), {"f1": "f", "delta1": "delta"}),
        (multiphase_lex(1, 1), {"f1_1": "f", "delta1_1": "delta"}),
    ],
    ids=["phase1", "lex1", "phaselex1x1"],
)
def test_size_one_matches_pr(other, mapping):
    rng = random.Random(7)
    pr = pr_template()
    for _ in range(300):
        nu = _rand_nu(rng, other)
        a = instantiate(other, nu, SPACE)
        b = instantiate(pr, _renamed(nu, mapping), SPACE)
        x, xp = _rand_point(rng), _rand_point(rng)
        assert eval_formula(a, x, xp) == eval_formula(b, x, xp)


@pytest.mark.parametrize("l", [1, 2, 3])
def test_phaselex_one_component_is_multiphase(l):  # noqa: E741
    rng = random.Random(l)
    mapping = {f"f1_{j}": f"f{j}" for j in range(1, l + 1)} | {f"delta1_{j}": f"delta{j}" for j in range(1, l + 1)}
    ml, mp = multiphase_lex(1, l), multiphase(l)
    for _ in range(300):
        nu = _rand_nu(rng, ml)
        x, xp = _rand_point(rng), _rand_point(rng)
        assert eval_formula(instantiate(ml, nu, SPACE), x, xp) == eval_formula(
            instantiate(mp, _renamed(nu, mapping), SPACE), x, xp
        )


def _phaselex_direct(k, l, fx, fxp, d):  # noqa: E741
    """The composed template formula before any distribution."""
    pos = lambda i, j: fx[i][j] > 0  # noqa: E731
    dec = lambda i, j: fx[i][j] - fxp[i][j] - d[i][j] > 0  # noqa: E731
    nonincr = lambda i, j: fx[i][j] - fxp[i][j] >= 0  # noqa: E731

    def mp_dec(i):
        return dec(i, 0) and all(dec(i, j) or pos(i, j - 1) for j in range(1, l))

    def mp_nonincr(i):
        return nonincr(i, 0) and all(nonincr(i, j) or pos(i, j - 1) for j in range(1, l))

    return (
        all(d[i][j] > 0 for i in range(k) for j in range(l))
        and all(any(pos(i, j) for j in range(l)) for i in range(k))
        and all(mp_nonincr(i) or any(mp_dec(t) for t in range(i)) for i in range(k - 1))
        and any(mp_dec(i) for i in range(k))
    )


@pytest.mark.parametrize("k, l", [(2, 2), (3, 2), (2, 3)])
def test_phaselex_distribution_preserves_semantics(k, l):  # noqa: E741
    rng = random.Random(k * 10 + l)
    t = multiphase_lex(k, l)
    for _ in range(300):
        nu = _rand_nu(rng, t)
        x, xp = _rand_point(rng), _rand_point(rng)

        def val(i, j, p):
            name = f"f{i + 1}_{j + 1}"
            return sum(nu[f"s_{name}_{v}"] * p[v] for v in SPACE.names) + nu[f"t_{name}"]

        fx = [[val(i, j, x) for j in range(l)] for i in range(k)]
        fxp = [[val(i, j, xp) for j in range(l)] for i in range(k)]
        d = [[nu[f"delta{i + 1}_{j + 1}"] for j in range(l)] for i in range(k)]
        assert eval_formula(instantiate(t, nu, SPACE), x, xp) == _phaselex_direct(k, l, fx, fxp, d)
