"""Asymptotic iteration eigenvalues for bosonic and su(2) algebraic Hamiltonians."""

from .aim import AimOptions, EigenResult, EigenRoot, decompose_chains, iterate, solve, termination_function
from .algebra import OperatorExpression, OperatorWord, RecurrenceRelation, build_recurrence
from .models import (
    AnharmonicParams,
    BistableParams,
    Su2Model,
    TwoModeParams,
    anharmonic_spec,
    bistable_spec,
    exact_reference,
    two_mode_to_su2,
)

__all__ = [
    "AimOptions",
    "AnharmonicParams",
    "BistableParams",
    "EigenResult",
    "EigenRoot",
    "OperatorExpression",
    "OperatorWord",
    "RecurrenceRelation",
    "Su2Model",
    "TwoModeParams",
    "anharmonic_spec",
    "bistable_spec",
    "build_recurrence",
    "decompose_chains",
    "exact_reference",
    "iterate",
    "solve",
    "termination_function",
    "two_mode_to_su2",
]
