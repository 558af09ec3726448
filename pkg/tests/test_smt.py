import shlex
import sys
from fractions import Fraction

import pytest
from conftest import affine, needs_solver, program, solve

from llrank.constraint import FALSE, ExistsConstraint, Poly, cmp, conj, evaluate
from llrank.motzkin import generate_constraint
from llrank.smt import (
    NonRationalModelError,
    ProcessError,
    Sat,
    Timeout,
    Unknown,
    Unsat,
    check_model,
    emit,
    parse_model,
    run_solver,
    substitute,
)
from llrank.templates import multiphase, piecewise

x, y = Poly.var("x"), Poly.var("y")


def _exists(formula, *names):
    return ExistsConstraint(formula, names, names)


def test_emit_single_variable():
    text = emit(_exists(cmp(x, ">"), "x")).text
    assert text.count("(declare-fun x () Real)") == 1
    assert text.count("(assert") == 1
    assert "(set-logic QF_NRA)" in text and "(check-sat)" in text and "(get-value (x))" in text


def test_emit_rational_as_quotient():
    text = emit(_exists(cmp(x - Poly.const(Fraction(1, 2)), ">"), "x")).text
    assert "(/ 1 2)" in text and "0.5" not in text


def test_emit_disjunction_branch():
    c = generate_constraint(program("fig1"), multiphase(2))
    text = emit(c).text
    ors = [ln for ln in text.splitlines() if ln.startswith("(assert (or (< ")]
    assert len(ors) == c.systems and all("(> mu_" in ln for ln in ors)


def test_emit_deterministic():
    a = emit(generate_constraint(program("pieces"), piecewise(2))).text
    b = emit(generate_constraint(program("pieces"), piecewise(2))).text
    assert a == b


@pytest.mark.parametrize(
    "text, expected",
    [
        ("((x (/ 1 2)))", Fraction(1, 2)),
        ("((x (- 3)))", Fraction(-3)),
        ("((x (- (/ 7 4))))", Fraction(-7, 4)),
        ("((x 0.125))", Fraction(1, 8)),
        ("((x 12))", Fraction(12)),
        ("(model (define-fun x () Real (/ 2 3)))", Fraction(2, 3)),
    ],
)
def test_parse_model_forms(text, expected):
    assert parse_model(text) == {"x": expected}


def test_parse_model_root_obj():
    with pytest.raises(NonRationalModelError):
        parse_model("((x (root-obj (+ (^ x 2) (- 2)) 1)))")


def _fake(tmp_path, stdout, code=0):
    script = tmp_path / "fake.py"
    script.write_text(f"import sys\nsys.stdin.read()\nsys.stdout.write({stdout!r})\nsys.exit({code})\n")
    return f"{shlex.quote(sys.executable)} {shlex.quote(str(script))}"


def test_root_obj_becomes_unknown(tmp_path):
    cmd = _fake(tmp_path, "sat\n((x (root-obj (+ (^ x 2) (- 2)) 1)))\n")
    r = run_solver(cmd, emit(_exists(cmp(x, ">"), "x")), 10_000)
    assert r == Unknown("non-rational model")


def test_malformed_verdict_is_unknown(tmp_path):
    r = run_solver(_fake(tmp_path, "maybe\n"), emit(_exists(cmp(x, ">"), "x")), 10_000)
    assert isinstance(r, Unknown)


def test_stdin_mode_sat(tmp_path):
    r = run_solver(_fake(tmp_path, "sat\n((x (/ 1 3)))\n"), emit(_exists(cmp(x, ">"), "x")), 10_000)
    assert r == Sat({"x": Fraction(1, 3)})


def test_missing_binary_is_process_error():
    r = run_solver("/nonexistent/solver {file}", emit(_exists(cmp(x, ">"), "x")), 1000)
    assert isinstance(r, ProcessError)


def test_crash_is_process_error(tmp_path):
    r = run_solver(_fake(tmp_path, "", code=4), emit(_exists(cmp(x, ">"), "x")), 10_000)
    assert isinstance(r, ProcessError)


@needs_solver
def test_false_is_unsat():
    assert isinstance(solve(_exists(FALSE)), Unsat)


@needs_solver
def test_contradiction_is_unsat():
    assert isinstance(solve(_exists(conj([cmp(x, ">"), cmp(x, "<")]), "x")), Unsat)


@needs_solver
def test_sat_model_validates():
    c = _exists(conj([cmp(x * y - Poly.const(2), "="), cmp(x - y, ">")]), "x", "y")
    r = solve(c)
    assert isinstance(r, Sat) and check_model(c, r.model)


@needs_solver
def test_timeout():
    c = generate_constraint(program("pieces"), multiphase(3))
    assert isinstance(solve(c, timeout_ms=1), Timeout)


def test_substitute_partial():
    c = _exists(cmp(x + y, ">"), "x", "y")
    s = substitute(c, {"x": Fraction(1)})
    assert s.formula == cmp(y + Poly.const(1), ">")
    assert s.variables == ("y",)


def test_substitute_full_folds():
    c = _exists(cmp(x + y, ">"), "x", "y")
    s = substitute(c, {"x": Fraction(1), "y": Fraction(0)})
    assert evaluate(s.formula, {}) and s.variables == ()


@needs_solver
def test_substitute_paper_parameters_fig1():
    d = program("fig1")
    c = generate_constraint(d, multiphase(2))
    nu = {"delta1": Fraction(1, 2), "delta2": Fraction(1, 2)}
    nu |= affine("f1", d.space.names, [0, -1], 1) | affine("f2", d.space.names, [1, 0], 1)
    rest = substitute(c, nu)
    assert set(rest.variables) == set(c.multipliers)
    assert isinstance(solve(rest), Sat)
