"""NSGA-II over refactoring sequences."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from ..antipatterns import DetectionConfig
from ..model import ArchitectureModel
from ..refactoring import (
    NoEligibleTarget,
    RefactoringAction,
    RefactoringSequence,
    apply,
    feasible,
    fold,
    random_action,
)
from .objectives import OBJECTIVES, EvaluationError, Evaluator, ObjectiveVector
from .pareto import crowding_distance, hypervolume, nondominated_filter, nondominated_sort

log = logging.getLogger(__name__)

MAX_RETRIES = 20


class OptimizationError(RuntimeError):
    """The search could not produce a feasible, evaluable genome."""


@dataclass
class OptimizerConfig:
    population_size: int = 16
    sequence_length: int = 4
    p_crossover: float = 0.8
    p_mutation: float = 0.2
    generations: int = 100
    runs: int = 1
    seed: int = 0
    fuzziness_threshold: float = 0.80
    enable_pas_objective: bool = True
    threads: int = 1

    def __post_init__(self):
        for name in ("p_crossover", "p_mutation", "fuzziness_threshold"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.population_size < 4 or self.population_size % 2:
            raise ValueError("population_size must be even and at least 4")
        if self.sequence_length < 1:
            raise ValueError("sequence_length must be positive")
        if self.generations < 0 or self.runs < 1 or self.threads < 1:
            raise ValueError("generations >= 0, runs >= 1 and threads >= 1 required")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "OptimizerConfig":
        return cls(**doc)


@dataclass
class Individual:
    sequence: RefactoringSequence
    objectives: ObjectiveVector
    rank: int = 0
    crowding: float = 0.0


@dataclass
class ParetoFront:
    """Non-dominated solutions plus, for a single run, its history.

    ``stats`` holds one row per generation (0 is the initial population)
    with min/max/median/mean of every objective over the first front, its
    size, the cumulative evaluation count and the hypervolume of that
    front against ``reference_point``.
    """

    solutions: list[Individual]
    stats: list[dict] = field(default_factory=list)
    evaluations: int = 0
    detector_calls: int = 0
    failures: int = 0
    reference_point: tuple[float, ...] | None = None
    wall_time: float = 0.0

    def __len__(self) -> int:
        return len(self.solutions)

    def objective_matrix(self) -> np.ndarray:
        return np.array([s.objectives.as_tuple() for s in self.solutions]).reshape(-1, len(OBJECTIVES))


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


# ---------------------------------------------------------------------------
# variation operators


def random_sequence(model: ArchitectureModel, length: int, rng: np.random.Generator, brf=None) -> RefactoringSequence:
    """A feasible sequence drawn action by action on the evolving model.

    Raises:
        NoEligibleTarget: some intermediate model has no applicable action.
    """
    actions = []
    current = model
    for _ in range(length):
        action = random_action(current, rng, brf)
        current = apply(action, current)
        actions.append(action)
    return RefactoringSequence(tuple(actions))


def crossover(a: RefactoringSequence, b: RefactoringSequence, rng: np.random.Generator, p_crossover: float = 1.0, cut: int | None = None):
    """Single-point crossover.

    With probability ``p_crossover`` the tails after a cut drawn uniformly
    from ``[1, len-1]`` are swapped; otherwise the parents are copied.
    Feasibility of the children is left to the caller.
    """
    if len(a) != len(b):
        raise ValueError("crossover needs sequences of equal length")
    n = len(a)
    if n < 2 or rng.random() >= p_crossover:
        return a, b
    if cut is None:
        cut = int(rng.integers(1, n))
    return (
        RefactoringSequence(a.actions[:cut] + b.actions[cut:]),
        RefactoringSequence(b.actions[:cut] + a.actions[cut:]),
    )


def mutate(sequence: RefactoringSequence, model: ArchitectureModel, rng: np.random.Generator, p_mutation: float = 1.0, brf=None) -> RefactoringSequence:
    """Replace one uniformly chosen position with a fresh random action.

    The replacement is drawn on the state left by the prefix, must differ
    from the original action and must keep the whole sequence feasible;
    up to ``MAX_RETRIES`` draws are made before giving up and returning the
    input unchanged.
    """
    if not len(sequence) or rng.random() >= p_mutation:
        return sequence
    pos = int(rng.integers(len(sequence)))
    prefix_state = fold(sequence.actions[:pos], model)
    if prefix_state is None:
        return sequence
    for _ in range(MAX_RETRIES):
        try:
            action = random_action(prefix_state, rng, brf)
        except NoEligibleTarget:
            return sequence
        if action == sequence[pos]:
            continue
        cand = RefactoringSequence(sequence.actions[:pos] + (action,) + sequence.actions[pos + 1:])
        if feasible(cand, model):
            return cand
    return sequence


def tournament(population: list[Individual], rng: np.random.Generator) -> Individual:
    """Binary tournament on (rank, -crowding)."""
    i, j = (int(x) for x in rng.integers(len(population), size=2))
    a, b = population[i], population[j]
    if (b.rank, -b.crowding) < (a.rank, -a.crowding):
        return b
    return a


def assign_rank_and_crowding(population: list[Individual]) -> list[list[int]]:
    fronts = nondominated_sort(population)
    for r, front in enumerate(fronts):
        dist = crowding_distance([population[i] for i in front])
        for i, d in zip(front, dist):
            population[i].rank = r
            population[i].crowding = float(d)
    return fronts


def select_survivors(union: list[Individual], size: int) -> list[Individual]:
    """Fill by fronts; the last partial front keeps its least crowded members."""
    fronts = assign_rank_and_crowding(union)
    chosen: list[int] = []
    for front in fronts:
        if len(chosen) + len(front) <= size:
            chosen.extend(front)
            continue
        # drop the most crowded member one at a time, recomputing distances
        rest = list(front)
        while len(chosen) + len(rest) > size:
            dist = crowding_distance([union[i] for i in rest])
            rest.pop(min(range(len(rest)), key=lambda k: (dist[k], -rest[k])))
        chosen.extend(rest)
        break
    return [union[i] for i in chosen]


# ---------------------------------------------------------------------------
# main loop


def _front_stats(gen: int, front: list[Individual], evaluations: int) -> dict:
    row: dict = {"generation": gen, "front_size": len(front), "evaluations": evaluations}
    mat = np.array([ind.objectives.as_tuple() for ind in front])
    for k, name in enumerate(OBJECTIVES):
        col = mat[:, k]
        row[f"{name}_min"] = float(col.min())
        row[f"{name}_max"] = float(col.max())
        row[f"{name}_median"] = float(np.median(col))
        row[f"{name}_mean"] = float(col.mean())
    return row


class NSGA2:
    """One optimization run; see :func:`run`."""

    def __init__(self, config: OptimizerConfig, model: ArchitectureModel, evaluator: Evaluator | None = None, brf=None):
        self.config = config
        self.model = model
        self.brf = brf
        self.evaluator = evaluator or Evaluator(
            model,
            DetectionConfig(fuzziness_threshold=config.fuzziness_threshold),
            enable_pas=config.enable_pas_objective,
        )

    def _evaluate(self, seq: RefactoringSequence) -> Individual | None:
        try:
            return Individual(seq, self.evaluator(seq))
        except EvaluationError as exc:
            log.debug("discarding %s: %s", seq.to_json(), exc)
            return None

    def _initial(self, j: int) -> Individual:
        rng = _rng(self.config.seed, 0, j)
        for _ in range(MAX_RETRIES):
            try:
                seq = random_sequence(self.model, self.config.sequence_length, rng, self.brf)
            except NoEligibleTarget:
                continue
            ind = self._evaluate(seq)
            if ind is not None:
                return ind
        raise OptimizationError("could not build an evaluable initial individual")

    def _offspring(self, population: list[Individual], g: int, j: int) -> list[Individual]:
        cfg = self.config
        rng = _rng(cfg.seed, g, j)
        for _ in range(MAX_RETRIES):
            pa, pb = tournament(population, rng), tournament(population, rng)
            ca, cb = crossover(pa.sequence, pb.sequence, rng, cfg.p_crossover)
            if not (feasible(ca, self.model) and feasible(cb, self.model)):
                continue
            ca = mutate(ca, self.model, rng, cfg.p_mutation, self.brf)
            cb = mutate(cb, self.model, rng, cfg.p_mutation, self.brf)
            kids = [self._evaluate(ca), self._evaluate(cb)]
            if all(k is not None for k in kids):
                return kids
        # parents are feasible and evaluated, so copying them is always admissible
        return [Individual(pa.sequence, pa.objectives), Individual(pb.sequence, pb.objectives)]

    def _map(self, fn, items):
        if self.config.threads > 1:
            with ThreadPoolExecutor(self.config.threads) as pool:
                return list(pool.map(fn, items))
        return [fn(x) for x in items]

    def run(self, callback=None) -> ParetoFront:
        cfg = self.config
        t0 = time.perf_counter()
        population = self._map(self._initial, range(cfg.population_size))
        history: list[list[Individual]] = []

        def record(gen):
            fronts = assign_rank_and_crowding(population)
            first = [population[i] for i in fronts[0]]
            history.append(first)
            row = _front_stats(gen, first, self.evaluator.evaluations)
            if callback is not None:
                callback(row)
            return row

        stats = [record(0)]
        for g in range(1, cfg.generations + 1):
            pairs = self._map(lambda j: self._offspring(population, g, j), range(cfg.population_size // 2))
            offspring = [ind for pair in pairs for ind in pair]
            population = select_survivors(population + offspring, cfg.population_size)
            stats.append(record(g))

        # reference point fixed once over the whole history so hypervolumes compare
        allpts = np.array([ind.objectives.minimization() for front in history for ind in front])
        lo, hi = allpts.min(axis=0), allpts.max(axis=0)
        ref = hi + 0.1 * np.where(hi > lo, hi - lo, 1.0)
        for row, front in zip(stats, history):
            row["hypervolume"] = hypervolume(front, ref)

        final = assign_rank_and_crowding(population)[0]
        seen: set[str] = set()
        solutions = []
        for i in final:
            key = population[i].sequence.to_json()
            if key not in seen:
                seen.add(key)
                solutions.append(population[i])
        return ParetoFront(
            solutions,
            stats,
            evaluations=self.evaluator.evaluations,
            detector_calls=self.evaluator.detector_calls,
            failures=self.evaluator.failures,
            reference_point=tuple(float(x) for x in ref),
            wall_time=time.perf_counter() - t0,
        )


def run(config: OptimizerConfig, model: ArchitectureModel, evaluator: Evaluator | None = None, callback=None) -> ParetoFront:
    """Run NSGA-II once with ``config.seed``.

    Every random draw comes from a generator keyed by (seed, generation,
    slot), so the result does not depend on evaluation order or threads.
    """
    return NSGA2(config, model, evaluator).run(callback)


def reference_front(fronts: list[ParetoFront]) -> ParetoFront:
    """Non-dominated union of several fronts, identical objective vectors collapsed."""
    pool = [s for f in fronts for s in f.solutions]
    keep = nondominated_filter(pool)
    return ParetoFront([pool[i] for i in keep])
