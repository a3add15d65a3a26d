"""Reference-vector guided multi-objective evolution."""

from .indicators import dominates, hypervolume_2d, non_dominated_mask
from .loop import Evaluator, GenerationSummary, Individual, RunResult, RveaConfig, run
from .problems import SENTINEL, Evaluation, MetamaterialProblem, Problem, SyntheticFrontProblem
from .reproduction import Niche, allocate, form_niches, local_count, plan_matings, reproduce
from .selection import apd, assign, select, translate_objectives
from .vectors import (
    ReferenceVectorSet,
    adapt_reference_vectors,
    adaptation_due,
    divisions_for,
    init_reference_vectors,
    simplex_lattice,
)

__all__ = [
    "dominates", "hypervolume_2d", "non_dominated_mask", "Evaluator", "GenerationSummary",
    "Individual", "RunResult", "RveaConfig", "run", "SENTINEL", "Evaluation",
    "MetamaterialProblem", "Problem", "SyntheticFrontProblem", "Niche", "allocate",
    "form_niches", "local_count", "plan_matings", "reproduce", "apd", "assign", "select",
    "translate_objectives", "ReferenceVectorSet", "adapt_reference_vectors", "adaptation_due",
    "divisions_for", "init_reference_vectors", "simplex_lattice",
]
