"""Objective vectors and the evaluation pipeline for one refactoring sequence."""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

from ..antipatterns import DetectionConfig, count_pas, detect
from ..lqn.model import InvalidModel, PerformanceResults
from ..lqn.perfq import EmptyIndexSet, perfq
from ..lqn.solver import SolverOptions, solve
from ..lqn.transform import transform
from ..model import ArchitectureModel, ModelError
from ..refactoring import RefactoringSequence, arch_dist, fold
from ..reliability import evaluate_reliability

OBJECTIVES = ("perfq", "reliability", "n_pas", "arch_dist")
# +1: maximize, -1: minimize
DIRECTIONS = {"perfq": 1, "reliability": 1, "n_pas": -1, "arch_dist": -1}


@dataclass(frozen=True)
class ObjectiveVector:
    perfq: float
    reliability: float
    n_pas: float
    arch_dist: float

    def __post_init__(self):
        vals = (self.perfq, self.reliability, self.n_pas, self.arch_dist)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite objective in {vals}")
        if not -1e-12 <= self.reliability <= 1.0 + 1e-12:
            raise ValueError(f"reliability {self.reliability} outside [0, 1]")

    def minimization(self) -> tuple[float, float, float, float]:
        """Image in which every objective is minimized."""
        return (-self.perfq, -self.reliability, float(self.n_pas), self.arch_dist)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.perfq, self.reliability, self.n_pas, self.arch_dist)

    def dominates(self, other: "ObjectiveVector") -> bool:
        a, b = self.minimization(), other.minimization()
        return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))


class EvaluationError(ModelError):
    """A feasible sequence produced a model that cannot be evaluated."""


@dataclass
class Evaluator:
    """Scores sequences against a fixed initial model.

    Results are cached by the canonical sequence JSON.  ``evaluations``
    counts distinct sequences evaluated (model alternatives generated) and
    ``detector_calls`` counts antipattern detection runs.
    """

    initial: ArchitectureModel
    detection: DetectionConfig = field(default_factory=DetectionConfig)
    enable_pas: bool = True
    solver: SolverOptions = field(default_factory=SolverOptions)
    evaluations: int = 0
    detector_calls: int = 0
    failures: int = 0

    def __post_init__(self):
        self.initial_results: PerformanceResults = solve(transform(self.initial), self.solver)
        self._cache: dict[str, ObjectiveVector | EvaluationError] = {}
        self._lock = threading.Lock()

    def _compute(self, seq: RefactoringSequence) -> ObjectiveVector:
        variant = fold(seq, self.initial)
        if variant is None:
            raise EvaluationError(f"infeasible sequence {seq.to_json()}")
        try:
            results = solve(transform(variant), self.solver)
            pq = perfq(self.initial_results, results)
            rel = evaluate_reliability(variant).reliability
        except (ModelError, InvalidModel, EmptyIndexSet) as exc:
            raise EvaluationError(str(exc)) from exc
        n_pas = 0
        if self.enable_pas:
            with self._lock:
                self.detector_calls += 1
            n_pas = count_pas(detect(variant, results, self.detection), self.detection)
        return ObjectiveVector(pq, rel, n_pas, arch_dist(seq, self.initial))

    def __call__(self, seq: RefactoringSequence) -> ObjectiveVector:
        """Objectives of ``seq``.

        Raises:
            EvaluationError: the refactored model is invalid or unsolvable.
        """
        key = seq.to_json()
        with self._lock:
            hit = self._cache.get(key)
        if hit is None:
            try:
                hit = self._compute(seq)
            except EvaluationError as exc:
                hit = exc
            with self._lock:
                if key not in self._cache:
                    self._cache[key] = hit
                    self.evaluations += 1
                    self.failures += isinstance(hit, EvaluationError)
                hit = self._cache[key]
        if isinstance(hit, EvaluationError):
            raise hit
        return hit
