"""Bounded signal temporal logic: AST, text grammar, and semantics."""

from .formula import (
    Always,
    And,
    Eventually,
    FalseFormula,
    Formula,
    Not,
    Or,
    Predicate,
    PredicateFn,
    Release,
    TrueFormula,
    Until,
    atom_functions,
    formula_length,
    is_positive_normal_form,
    required_predicate_times,
    to_positive_normal_form,
    to_text,
)
from .parser import FormulaSyntaxError, parse_formula
from .semantics import (
    MissingBoundError,
    TrajectoryTooShortError,
    eval_boolean,
    eval_probabilistic_robustness,
    eval_robustness,
)

__all__ = [
    "Always",
    "And",
    "Eventually",
    "FalseFormula",
    "Formula",
    "Not",
    "Or",
    "Predicate",
    "PredicateFn",
    "Release",
    "TrueFormula",
    "Until",
    "atom_functions",
    "formula_length",
    "is_positive_normal_form",
    "required_predicate_times",
    "to_positive_normal_form",
    "to_text",
    "FormulaSyntaxError",
    "parse_formula",
    "MissingBoundError",
    "TrajectoryTooShortError",
    "eval_boolean",
    "eval_probabilistic_robustness",
    "eval_robustness",
]
