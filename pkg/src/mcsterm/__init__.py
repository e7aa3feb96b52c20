"""Termination analysis and ranking-function construction for monotonicity constraint systems."""

from __future__ import annotations

from .core import (
    Atom,
    Invariant,
    InvariantViolation,
    Mcs,
    MonotonicityConstraint,
    UsageError,
    VarNode,
    close,
    collapse,
    compose,
)
from .ranking import RankingFunction, check_ranking, synthesize_ranking, verify_ranking
from .termination import ALGORITHMS, Verdict, decide, find_witness
from .textio import ParseError, emit_report, format_mcs, parse_mcs
from .transform import fully_elaborate, stabilize

__all__ = [
    "ALGORITHMS",
    "Atom",
    "Invariant",
    "InvariantViolation",
    "Mcs",
    "MonotonicityConstraint",
    "ParseError",
    "RankingFunction",
    "UsageError",
    "VarNode",
    "Verdict",
    "check_ranking",
    "close",
    "collapse",
    "compose",
    "decide",
    "emit_report",
    "find_witness",
    "format_mcs",
    "fully_elaborate",
    "parse_mcs",
    "stabilize",
    "synthesize_ranking",
    "verify_ranking",
]
