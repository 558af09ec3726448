"""SMT-LIB 2 (QF_NRA) serialization and an external-solver subprocess driver."""

from __future__ import annotations

import logging
import os
import re
import shlex
import subprocess
import tempfile
import threading
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Union

from .constraint import Bool, CFormula, Cmp, Conj, ExistsConstraint, Poly
from .constraint import substitute as _substitute_formula

log = logging.getLogger(__name__)

SOLVER_ENV = "LLRANK_SOLVER"
DEFAULT_SOLVER_CMD = 'z3 -smt2 "tactic.default_tactic=(then simplify solve-eqs smt)" {file}'

Model = dict[str, Fraction]


def default_solver_cmd() -> str:
    return os.environ.get(SOLVER_ENV) or DEFAULT_SOLVER_CMD


# ---------------------------------------------------------------------------
# emission


def _num(q: Fraction) -> str:
    mag = abs(q)
    body = str(mag.numerator) if mag.denominator == 1 else f"(/ {mag.numerator} {mag.denominator})"
    return f"(- {body})" if q < 0 else body


def _term(p: Poly) -> str:
    if p.is_zero():
        return "0"
    out = []
    for mono, c in p.terms:
        if not mono:
            out.append(_num(c))
        elif c == 1:
            out.append(mono[0] if len(mono) == 1 else f"(* {' '.join(mono)})")
        else:
            out.append(f"(* {_num(c)} {' '.join(mono)})")
    return out[0] if len(out) == 1 else f"(+ {' '.join(out)})"


def _formula(f: CFormula) -> str:
    if isinstance(f, Bool):
        return "true" if f.value else "false"
    if isinstance(f, Cmp):
        # keep the constant on the right-hand side
        const = f.poly.constant()
        lhs = f.poly - Poly.const(const)
        return f"({f.op} {_term(lhs)} {_num(-const)})"
    op = "and" if isinstance(f, Conj) else "or"
    return f"({op} {' '.join(_formula(a) for a in f.args)})"


@dataclass(frozen=True)
class QueryScript:
    text: str
    var_order: tuple[str, ...]


def emit(c: ExistsConstraint, comment: str | None = None) -> QueryScript:
    """Render a constraint as a self-contained QF_NRA script."""
    lines = []
    if comment:
        lines.extend(f"; {ln}" for ln in comment.splitlines())
    lines.append("(set-option :produce-models true)")
    lines.append("(set-logic QF_NRA)")
    lines.extend(f"(declare-fun {v} () Real)" for v in c.variables)
    f = c.formula
    for part in f.args if isinstance(f, Conj) else (f,):
        lines.append(f"(assert {_formula(part)})")
    lines.append("(check-sat)")
    if c.variables:
        lines.append(f"(get-value ({' '.join(c.variables)}))")
    lines.append("(exit)")
    return QueryScript("\n".join(lines) + "\n", tuple(c.variables))


# ---------------------------------------------------------------------------
# results


@dataclass(frozen=True)
class Sat:
    model: Model = field(default_factory=dict)
    verdict = "sat"


@dataclass(frozen=True)
class Unsat:
    verdict = "unsat"


@dataclass(frozen=True)
class Unknown:
    reason: str = ""
    verdict = "unknown"


@dataclass(frozen=True)
class Timeout:
    verdict = "timeout"


@dataclass(frozen=True)
class ProcessError:
    detail: str = ""
    verdict = "error"


SolverResult = Union[Sat, Unsat, Unknown, Timeout, ProcessError]


class NonRationalModelError(ValueError):
    pass


class ModelParseError(ValueError):
    pass


# ---------------------------------------------------------------------------
# model parsing

_SEXP_TOKEN = re.compile(r'\s*(?:(\()|(\))|("(?:[^"]|"")*")|(\|[^|]*\|)|([^\s()";]+)|(;[^\n]*))')


def _read_sexps(text: str) -> list:
    stack: list[list] = [[]]
    pos = 0
    while pos < len(text):
        m = _SEXP_TOKEN.match(text, pos)
        if not m or m.end() == pos:
            if text[pos:].strip() == "":
                break
            raise ModelParseError(f"cannot tokenize solver output near {text[pos : pos + 20]!r}")
        pos = m.end()
        lp, rp, string, quoted, atom, _comment = m.groups()
        if lp:
            stack.append([])
        elif rp:
            if len(stack) == 1:
                raise ModelParseError("unbalanced ')' in solver output")
            done = stack.pop()
            stack[-1].append(done)
        elif string is not None:
            stack[-1].append(string)
        elif quoted is not None:
            stack[-1].append(quoted[1:-1])
        elif atom is not None:
            stack[-1].append(atom)
    if len(stack) != 1:
        raise ModelParseError("unbalanced '(' in solver output")
    return stack[0]


def _value(v) -> Fraction:
    if isinstance(v, str):
        try:
            return Fraction(v)
        except ValueError:
            raise ModelParseError(f"not a numeric value: {v!r}") from None
    if not v:
        raise ModelParseError("empty value")
    head = v[0]
    if head == "-" and len(v) == 2:
        return -_value(v[1])
    if head == "/" and len(v) == 3:
        den = _value(v[2])
        if den == 0:
            raise ModelParseError("zero denominator in model value")
        return _value(v[1]) / den
    if head in ("root-obj", "root-of-with-interval", "_") or head == "root":
        raise NonRationalModelError("non-rational model")
    raise ModelParseError(f"unsupported value form: {v!r}")


def parse_model(text: str) -> Model:
    """Read ``get-value`` or ``get-model`` output into exact rationals."""
    model: Model = {}
    for top in _read_sexps(text):
        if not isinstance(top, list):
            continue
        items = top[1:] if top and top[0] == "model" else top
        for item in items:
            if not isinstance(item, list) or not item:
                continue
            if item[0] == "define-fun" and len(item) == 5:
                model[item[1]] = _value(item[4])
            elif item[0] == "error":
                continue
            elif len(item) == 2 and isinstance(item[0], str):
                model[item[0]] = _value(item[1])
    return model


# ---------------------------------------------------------------------------
# running


def _interpret(stdout: str, stderr: str, var_order) -> SolverResult:
    lines = [ln.strip() for ln in stdout.splitlines() if ln.strip()]
    if not lines:
        return ProcessError(f"solver produced no output: {stderr.strip()[:500]}")
    verdict, rest = lines[0], "\n".join(lines[1:])
    if verdict == "unsat":
        return Unsat()
    if verdict in ("unknown", "timeout"):
        return Unknown(verdict if not stderr.strip() else stderr.strip()[:500])
    if verdict != "sat":
        return Unknown(f"malformed verdict {verdict[:200]!r}")
    try:
        model = parse_model(rest)
    except NonRationalModelError:
        return Unknown("non-rational model")
    except ModelParseError as exc:
        return Unknown(f"unreadable model: {exc}")
    missing = [v for v in var_order if v not in model]
    if missing:
        return Unknown(f"model lacks {len(missing)} variables, e.g. {missing[0]}")
    return Sat(model)


def run_solver(
    cmd: str,
    q: QueryScript,
    timeout_ms: int,
    cancel: threading.Event | None = None,
) -> SolverResult:
    """Run ``cmd`` on the script; ``{file}`` in ``cmd`` is replaced by a temp file path,
    otherwise the script is piped to standard input."""
    tmp = None
    try:
        if "{file}" in cmd:
            fd, tmp = tempfile.mkstemp(suffix=".smt2", prefix="llrank_")
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(q.text)
            argv = [a.replace("{file}", tmp) for a in shlex.split(cmd)]
            stdin_text = None
        else:
            argv = shlex.split(cmd)
            stdin_text = q.text
        try:
            proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE if stdin_text is not None else subprocess.DEVNULL,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
            )
        except OSError as exc:
            return ProcessError(f"cannot start {argv[0]!r}: {exc}")
        deadline = time.monotonic() + timeout_ms / 1000
        result: dict = {}

        def communicate():
            result["out"] = proc.communicate(stdin_text)

        reader = threading.Thread(target=communicate, daemon=True)
        reader.start()
        while reader.is_alive():
            reader.join(0.02)
            if time.monotonic() > deadline:
                proc.kill()
                reader.join()
                return Timeout()
            if cancel is not None and cancel.is_set():
                proc.kill()
                reader.join()
                return Unknown("cancelled")
        stdout, stderr = result.get("out", ("", ""))
        if proc.returncode not in (0, 1) and not stdout.strip():
            return ProcessError(f"exit status {proc.returncode}: {stderr.strip()[:500]}")
        return _interpret(stdout, stderr, q.var_order)
    finally:
        if tmp:
            try:
                os.unlink(tmp)
            except OSError:
                pass


def substitute(c: ExistsConstraint, partial: Mapping[str, Fraction]) -> ExistsConstraint:
    """Constant-fold the bound variables away."""
    unknown = set(partial) - set(c.variables)
    if unknown:
        log.debug("ignoring bindings for undeclared variables %s", sorted(unknown))
    return c.substitute({k: Fraction(v) for k, v in partial.items()})


def check_model(c: ExistsConstraint, model: Mapping[str, Fraction]) -> bool:
    """Ground-evaluate the constraint under ``model`` with exact arithmetic."""
    g = _substitute_formula(c.formula, model)
    return isinstance(g, Bool) and g.value
