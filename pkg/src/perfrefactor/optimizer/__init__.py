"""Multi-objective search over refactoring sequences."""

from .nsga import (
    Individual,
    NSGA2,
    OptimizationError,
    OptimizerConfig,
    ParetoFront,
    crossover,
    mutate,
    random_sequence,
    reference_front,
    run,
    select_survivors,
    tournament,
)
from .objectives import DIRECTIONS, OBJECTIVES, EvaluationError, Evaluator, ObjectiveVector
from .pareto import crowding_distance, dominates, hypervolume, nondominated_filter, nondominated_sort

__all__ = [
    "DIRECTIONS",
    "EvaluationError",
    "Evaluator",
    "Individual",
    "NSGA2",
    "OBJECTIVES",
    "ObjectiveVector",
    "OptimizationError",
    "OptimizerConfig",
    "ParetoFront",
    "crossover",
    "crowding_distance",
    "dominates",
    "hypervolume",
    "mutate",
    "nondominated_filter",
    "nondominated_sort",
    "random_sequence",
    "reference_front",
    "run",
    "select_survivors",
    "tournament",
]
