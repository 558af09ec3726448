import shlex
import shutil
from fractions import Fraction

import pytest

from llrank.cli import corpus_path
from llrank.loop import load_program
from llrank.smt import default_solver_cmd, emit, run_solver

CORPUS = ("fig1", "twobranch", "rotation", "reset", "pieces")


def solver_available() -> bool:
    return shutil.which(shlex.split(default_solver_cmd())[0]) is not None


needs_solver = pytest.mark.skipif(not solver_available(), reason="no SMT solver on PATH")


def program(name):
    return load_program(corpus_path(name))


def solve(constraint, timeout_ms=60_000):
    return run_solver(default_solver_cmd(), emit(constraint), timeout_ms)


def Q(s):
    return Fraction(s)


def affine(prefix, names, coeffs, const):
    """Model entries for an affine symbol ``prefix`` with slopes ``coeffs``."""
    out = {f"s_{prefix}_{v}": Fraction(c) for v, c in zip(names, coeffs)}
    out[f"t_{prefix}"] = Fraction(const)
    return out


@pytest.fixture(params=CORPUS)
def corpus_program(request):
    return program(request.param)
