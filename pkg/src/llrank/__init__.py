"""Termination proofs for linear loop programs via linear ranking templates."""

from .cli import ProveOutcome, ProverConfig, Status, corpus_path, prove
from .loop import DnfProgram, load_program, parse_program, to_dnf, to_nnf
from .motzkin import apply_motzkin, build_system, generate_constraint
from .ranking import certify, evaluate, extract, ordinal_cmp
from .templates import lexicographic, multiphase, multiphase_lex, piecewise, pr_template

__version__ = "0.1.0"

__all__ = [
    "DnfProgram",
    "ProveOutcome",
    "ProverConfig",
    "Status",
    "apply_motzkin",
    "build_system",
    "certify",
    "corpus_path",
    "evaluate",
    "extract",
    "generate_constraint",
    "lexicographic",
    "load_program",
    "multiphase",
    "multiphase_lex",
    "ordinal_cmp",
    "parse_program",
    "piecewise",
    "pr_template",
    "prove",
    "to_dnf",
    "to_nnf",
]
