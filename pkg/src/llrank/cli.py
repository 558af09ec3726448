"""Command-line driver: try a pool of ranking templates on a loop program."""

from __future__ import annotations

import argparse
import enum
import json
import logging
import re
import sys
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Optional

from .loop import DnfBlowupError, DnfProgram, ParseError, format_rational, load_program
from .motzkin import generate_constraint
from .ranking import CertReport, ExtractionError, RankingFunction, certify, extract
from .smt import ProcessError, Sat, SolverResult, check_model, default_solver_cmd, emit, run_solver
from .templates import DEFAULT_POOL, RankingTemplate, TemplateError, parse_template_specs

log = logging.getLogger("llrank")


class Status(enum.Enum):
    TERMINATING = "terminating"
    UNKNOWN = "unknown"
    INPUT_ERROR = "input-error"
    SOLVER_ERROR = "solver-error"

    @property
    def exit_code(self) -> int:
        return {"terminating": 0, "unknown": 1, "input-error": 2, "solver-error": 3}[self.value]


@dataclass
class ProverConfig:
    templates: str = DEFAULT_POOL
    solver_cmd: str = field(default_factory=default_solver_cmd)
    timeout_ms: int = 60_000
    grid_bound: int = 10
    emit_dir: Optional[Path] = None
    output_format: str = "human"
    parallel: bool = False

    def __post_init__(self):
        if self.timeout_ms <= 0:
            raise ValueError("timeout must be positive")
        if self.grid_bound < 0:
            raise ValueError("grid bound must be >= 0")
        if self.output_format not in ("human", "machine"):
            raise ValueError(f"unknown output format {self.output_format!r}")


@dataclass
class Attempt:
    template: str
    verdict: str
    seconds: float
    detail: str = ""


@dataclass
class ProveOutcome:
    status: Status
    program: str = ""
    attempts: list[Attempt] = field(default_factory=list)
    template: Optional[str] = None
    ranking: Optional[RankingFunction] = None
    assignment: dict[str, Fraction] = field(default_factory=dict)
    certification: Optional[CertReport] = None
    message: str = ""

    def to_dict(self) -> dict:
        cert = None
        if self.certification is not None:
            c = self.certification
            cert = {
                "grid_bound": c.bound,
                "pairs_checked": c.pairs_checked,
                "violations": len(c.violations),
                "examples": [{"x": list(x), "x_next": list(xp), "reason": why} for x, xp, why in c.violations[:5]],
            }
        return {
            "program": self.program,
            "status": self.status.value,
            "templates_tried": [
                {"template": a.template, "verdict": a.verdict, "seconds": round(a.seconds, 3), "detail": a.detail}
                for a in self.attempts
            ],
            "template": self.template,
            "assignment": {k: format_rational(v) for k, v in self.assignment.items()},
            "ranking_function": self.ranking.render() if self.ranking else None,
            "certification": cert,
            "message": self.message,
        }


def _query_name(program: str, spec: str, n: int) -> str:
    return f"{program}_{re.sub(r'[^A-Za-z0-9]+', '', spec)}_{n}.smt2"


def _solve(d: DnfProgram, spec: str, t: RankingTemplate, n: int, cfg: ProverConfig, cancel=None):
    t0 = time.monotonic()
    c = generate_constraint(d, t)
    script = emit(c, comment=f"program {d.name}, template {spec}")
    if cfg.emit_dir is not None:
        cfg.emit_dir.mkdir(parents=True, exist_ok=True)
        (cfg.emit_dir / _query_name(d.name or "program", spec, n)).write_text(script.text, encoding="utf-8")
    log.info("%s: %d variables, %d Motzkin systems", spec, len(c.variables), c.systems)
    result = run_solver(cfg.solver_cmd, script, cfg.timeout_ms, cancel)
    return c, result, time.monotonic() - t0


def _detail(r: SolverResult) -> str:
    return getattr(r, "reason", "") or getattr(r, "detail", "")


def _finish(out: ProveOutcome, d: DnfProgram, spec: str, t: RankingTemplate, c, model, cfg) -> ProveOutcome:
    """Validate, extract and certify a model; any failure here is an internal error."""
    out.template = spec
    if not check_model(c, model):
        out.status = Status.SOLVER_ERROR
        out.message = f"{spec}: solver model does not satisfy the constraint"
        return out
    out.assignment = {v: model[v] for v in c.parameters}
    try:
        out.ranking = extract(t, model, d.space)
    except ExtractionError as exc:
        out.status = Status.SOLVER_ERROR
        out.message = f"{spec}: {exc}"
        return out
    if cfg.grid_bound > 0:
        out.certification = certify(out.ranking, d, cfg.grid_bound)
        if not out.certification.passed:
            x, xp, why = out.certification.violations[0]
            out.status = Status.SOLVER_ERROR
            out.message = (
                f"{spec}: certification failed on {len(out.certification.violations)} pairs, "
                f"first at {x} -> {xp}: {why}"
            )
            return out
    out.status = Status.TERMINATING
    return out


def prove(file, cfg: ProverConfig | None = None) -> ProveOutcome:
    """Try each template in pool order; the first satisfiable one wins."""
    cfg = cfg or ProverConfig()
    path = Path(file)
    out = ProveOutcome(Status.UNKNOWN, program=path.stem)
    try:
        d = load_program(_resolve(path))
        pool = parse_template_specs(cfg.templates)
    except (OSError, ParseError, DnfBlowupError, TemplateError, ValueError) as exc:
        out.status = Status.INPUT_ERROR
        out.message = f"{file}: {exc}"
        return out

    if cfg.parallel:
        results = _race(d, pool, cfg)
    else:
        results = None

    for n, (spec, t) in enumerate(pool):
        if results is None:
            try:
                c, r, secs = _solve(d, spec, t, n, cfg)
            except (TemplateError, DnfBlowupError) as exc:
                out.attempts.append(Attempt(spec, "error", 0.0, str(exc)))
                continue
        else:
            c, r, secs = results[n]
        out.attempts.append(Attempt(spec, r.verdict, secs, _detail(r)))
        log.info("%s: %s (%.2fs)", spec, r.verdict, secs)
        if isinstance(r, Sat):
            if results is not None:
                # later templates may have been cancelled; keep the record honest
                for m in range(n + 1, len(pool)):
                    _, rm, sm = results[m]
                    out.attempts.append(Attempt(pool[m][0], rm.verdict, sm, _detail(rm)))
            return _finish(out, d, spec, t, c, r.model, cfg)

    if out.attempts and all(a.verdict == ProcessError.verdict for a in out.attempts):
        out.status = Status.SOLVER_ERROR
        out.message = "the solver failed on every template: " + out.attempts[0].detail
    else:
        out.status = Status.UNKNOWN
        out.message = "no ranking function of the tried shapes; this is not a proof of nontermination"
    return out


def _race(d: DnfProgram, pool, cfg: ProverConfig):
    """Run every template concurrently; a Sat cancels the templates after it."""
    cancels = [threading.Event() for _ in pool]

    def job(n):
        spec, t = pool[n]
        c, r, secs = _solve(d, spec, t, n, cfg, cancels[n])
        if isinstance(r, Sat):
            for ev in cancels[n + 1 :]:
                ev.set()
        return c, r, secs

    with ThreadPoolExecutor(max_workers=len(pool)) as ex:
        return list(ex.map(job, range(len(pool))))


def _resolve(path: Path) -> Path:
    """Fall back to the bundled corpus for bare names like ``fig1.llp``."""
    if path.exists() or path.parent != Path("."):
        return path
    bundled = resources.files("llrank") / "corpus" / path.name
    if bundled.is_file():
        return Path(str(bundled))
    return path


def corpus_path(name: str) -> Path:
    """Path of a bundled example program (``fig1``, ``twobranch``, ``rotation``, ``reset``, ``pieces``)."""
    return Path(str(resources.files("llrank") / "corpus" / f"{name}.llp"))


# ---------------------------------------------------------------------------
# output


def render_human(out: ProveOutcome) -> str:
    lines = [f"program: {out.program}"]
    for a in out.attempts:
        extra = f"  ({a.detail})" if a.detail else ""
        lines.append(f"  {a.template:<14} {a.verdict:<8} {a.seconds:7.2f}s{extra}")
    lines.append(f"result: {out.status.value.upper()}" + (f" ({out.template})" if out.template else ""))
    if out.ranking is not None:
        lines.append(f"ranking function: {out.ranking.render()}")
    if out.certification is not None:
        c = out.certification
        lines.append(
            f"certification: {c.pairs_checked} relation pairs on [-{c.bound},{c.bound}], {len(c.violations)} violations"
        )
    if out.message:
        lines.append(out.message)
    return "\n".join(lines)


def render_machine(out: ProveOutcome) -> str:
    return json.dumps(out.to_dict(), indent=2, ensure_ascii=False)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="llrank",
        description="Prove termination of linear loop programs with linear ranking templates.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser(
        "prove",
        help="search for a ranking function",
        description=(
            "Exit status: 0 terminating, 1 unknown, 2 input error, 3 solver error. "
            "'unknown' only means that none of the tried templates fits; it is not a nontermination verdict."
        ),
    )
    p.add_argument("file", help="program file (.llp); bundled examples may be named directly, e.g. fig1.llp")
    p.add_argument("--templates", default=DEFAULT_POOL, help=f"comma-separated pool (default: {DEFAULT_POOL})")
    p.add_argument(
        "--solver-cmd",
        default=None,
        help="solver command, '{file}' is replaced by the query path; default from $LLRANK_SOLVER or z3",
    )
    p.add_argument("--timeout-ms", type=int, default=60_000)
    p.add_argument("--grid-bound", type=int, default=10, help="certification grid half-width, 0 disables")
    p.add_argument("--emit-smt", metavar="DIR", type=Path, help="write each query to DIR")
    p.add_argument("--format", choices=("human", "machine"), default="human")
    p.add_argument("--parallel", action="store_true", help="race all templates, earliest pool index wins")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        cfg = ProverConfig(
            templates=args.templates,
            solver_cmd=args.solver_cmd or default_solver_cmd(),
            timeout_ms=args.timeout_ms,
            grid_bound=args.grid_bound,
            emit_dir=args.emit_smt,
            output_format=args.format,
            parallel=args.parallel,
        )
    except ValueError as exc:
        out = ProveOutcome(Status.INPUT_ERROR, program=Path(args.file).stem, message=str(exc))
    else:
        out = prove(args.file, cfg)
    print(render_machine(out) if args.format == "machine" else render_human(out))
    return out.status.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
