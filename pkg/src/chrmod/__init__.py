"""chrmod: a CHR engine and a confluence-modulo-equivalence analyzer."""

from .checker import CheckSettings, confluence_report, random_corner_audit
from .corners import enumerate_pre_corners
from .engine import confluence_by_exhaustion, enumerate_steps, explore, initial_state, step
from .program import Program, Record, Rule, parse_program, parse_query
from .state import (State, canonical_key, check_equivalence, check_invariant,
                    equivalence_from_dict, invariant_from_dict)
from .term import Num, Struct, Subst, Var, unify

__version__ = "0.1.0"

__all__ = [
    "CheckSettings", "Num", "Program", "Record", "Rule", "State", "Struct", "Subst", "Var",
    "canonical_key", "check_equivalence", "check_invariant", "confluence_by_exhaustion",
    "confluence_report", "enumerate_pre_corners", "enumerate_steps", "equivalence_from_dict",
    "explore", "initial_state", "invariant_from_dict", "parse_program", "parse_query",
    "random_corner_audit", "step", "unify",
]
