"""Optimal limited-contingency planning for finite-horizon POMDPs.

Plans may branch on observations at most ``k`` times (per path, along one
line, or in total). :func:`solve` computes the optimal value for every belief
by level-stacked value iteration over alpha-vectors; :func:`extract` turns the
result into an explicit plan tree; :func:`enumerate_optimal` is the brute-force
baseline used to check it.
"""

from .alpha import StageValueFunction, VectorSet, evaluate, prune
from .enumerator import (Disagreement, ResourceLimitExceeded, compare, enumerate_optimal,
                         estimate_nodes)
from .model import (ImpossibleObservation, ModelError, ParseError, PomdpModel, format_model,
                    load_model, parse_model)
from .plan import (ContingentPlan, PlanError, analyze_structure, evaluate_plan, extract,
                   satisfies_variant)
from .problems import grid10x10, hz_maze, tiger
from .protocols import BranchProtocol, enumerate_branch_protocols
from .solver import ConfigError, SolveConfig, SolvedPolicy, solve, value_at

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "ContingentPlan", "Disagreement", "ImpossibleObservation", "ModelError",
    "ParseError", "PlanError", "PomdpModel", "ResourceLimitExceeded", "SolveConfig",
    "SolvedPolicy", "StageValueFunction", "VectorSet", "BranchProtocol", "analyze_structure",
    "compare", "enumerate_branch_protocols", "enumerate_optimal", "estimate_nodes", "evaluate",
    "evaluate_plan", "extract", "format_model", "grid10x10", "hz_maze", "load_model",
    "parse_model", "prune", "satisfies_variant", "solve", "tiger", "value_at",
]
