"""Fuzzy detection of performance antipatterns.

Each antipattern kind is a conjunction of numeric literals evaluated on a
model and its solved performance indices.  A literal is turned into a
probability by linear interpolation between its minimum and maximum over
all candidate targets in the system, and a conjunction takes the minimum
of its literals' probabilities.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .lqn.model import PerformanceResults
from .lqn.transform import interacting_components, processor_groups
from .model import ACTOR, ArchitectureModel, message_routes

KINDS = (
    "PipeAndFilter",
    "Blob",
    "ConcurrentProcessingSystem",
    "ExtensiveProcessing",
    "EmptySemiTruck",
    "TowerOfBabel",
)
DETERMINISTIC_THRESHOLD = 1.0 - 1e-9
DEFAULT_THRESHOLDS = (0.55, 0.80, 0.95)


class OutOfBounds(ValueError):
    """A literal lies outside the bounds it is interpolated between."""


@dataclass(frozen=True)
class DetectionConfig:
    """Detection settings.

    Attributes:
        fuzziness_threshold: minimum probability for an instance to count.
        mode: ``"fuzzy"`` or ``"deterministic"`` (only certain instances count).
        aggregate: ``"count"`` (default) or the experimental ``"sum"``,
            which adds up probabilities of counted instances instead.
    """

    fuzziness_threshold: float = 0.80
    mode: str = "fuzzy"
    aggregate: str = "count"

    def __post_init__(self):
        if not 0.0 < self.fuzziness_threshold <= 1.0:
            raise ValueError(f"fuzziness threshold must be in (0, 1], got {self.fuzziness_threshold}")
        if self.mode not in ("fuzzy", "deterministic"):
            raise ValueError(f"unknown detection mode {self.mode!r}")
        if self.aggregate not in ("count", "sum"):
            raise ValueError(f"unknown aggregate {self.aggregate!r}")

    @property
    def threshold(self) -> float:
        return DETERMINISTIC_THRESHOLD if self.mode == "deterministic" else self.fuzziness_threshold


@dataclass(frozen=True)
class AntipatternInstance:
    kind: str
    target: tuple[str, ...]
    probability: float
    literal_values: dict = field(default_factory=dict, compare=False, hash=False)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "target": list(self.target),
            "probability": self.probability,
            "literal_values": {k: dict(v) for k, v in self.literal_values.items()},
        }


def fuzzy_probability(literal: float, lb: float, ub: float) -> float:
    """Linear membership of ``literal`` between ``lb`` (0) and ``ub`` (1).

    Raises:
        OutOfBounds: ``literal`` is not within ``[lb, ub]``.
    """
    if not lb <= literal <= ub:
        raise OutOfBounds(f"literal {literal} outside [{lb}, {ub}]")
    if ub == lb:
        return 0.0
    return 1.0 - (ub - literal) / (ub - lb)


def _conjunction(literals: dict[str, float], bounds: dict[str, tuple[float, float]]) -> tuple[float, dict]:
    probs = []
    explained = {}
    for name, value in literals.items():
        lb, ub = bounds[name]
        probs.append(fuzzy_probability(value, lb, ub))
        explained[name] = {"value": value, "lb": lb, "ub": ub}
    return min(probs), explained


def _bounds(rows: dict, names: tuple[str, ...]) -> dict[str, tuple[float, float]]:
    return {n: (min(r[n] for r in rows.values()), max(r[n] for r in rows.values())) for n in names}


def _emit(kind: str, rows: dict, out: list) -> None:
    """Turn per-target literal rows into instances with positive probability."""
    if not rows:
        return
    names = tuple(next(iter(rows.values())))
    bounds = _bounds(rows, names)
    for target, lits in rows.items():
        p, explained = _conjunction(lits, bounds)
        if p > 0:
            key = target if isinstance(target, tuple) else (target,)
            out.append(AntipatternInstance(kind, key, p, explained))


class _Context:
    """Quantities shared by several literals."""

    def __init__(self, model: ArchitectureModel, results: PerformanceResults):
        self.model = model
        self.results = results
        groups = processor_groups(model, interacting_components(model))
        self.proc_of = {}
        for c in model.components:
            nodes = model.nodes_of(c.id)
            self.proc_of[c.id] = groups.get(nodes[0]) if nodes else None

    def proc_util(self, component: str) -> float:
        p = self.proc_of.get(component)
        if p is None or p not in self.results.utilization:
            return 0.0
        return self.results.per_server_utilization(p)


def _blob(ctx: _Context, out: list) -> None:
    traffic = Counter()
    for s in ctx.model.scenarios:
        for m in s.messages:
            if m.sender != ACTOR:
                traffic[m.sender] += m.repetitions
            traffic[ctx.model.owner_of(m.receiver_op)] += m.repetitions
    rows = {
        c.id: {"traffic": float(traffic[c.id]), "utilization": ctx.proc_util(c.id)}
        for c in ctx.model.components
    }
    _emit("Blob", rows, out)


def _cps(ctx: _Context, out: list) -> None:
    res = ctx.results
    utils = {p: res.per_server_utilization(p) for p in sorted(res.utilization)}
    if not utils:
        return
    hottest = max(utils, key=lambda p: (utils[p], p))
    lo, hi = min(utils.values()), max(utils.values())
    lits = {"max_utilization": hi, "utilization_spread": hi - lo}
    bounds = {"max_utilization": (lo, hi), "utilization_spread": (0.0, hi)}
    p, explained = _conjunction(lits, bounds)
    if p > 0:
        out.append(AntipatternInstance("ConcurrentProcessingSystem", (hottest,), p, explained))


def _extensive(ctx: _Context, out: list) -> None:
    longest = Counter()
    for s in ctx.model.scenarios:
        for m in s.messages:
            c = ctx.model.owner_of(m.receiver_op)
            longest[c] = max(longest[c], m.exec_time)
    rows = {
        c.id: {"max_exec_time": float(longest[c.id]), "utilization": ctx.proc_util(c.id)}
        for c in ctx.model.components
    }
    _emit("ExtensiveProcessing", rows, out)


def _pipe_and_filter(ctx: _Context, out: list) -> None:
    model, res = ctx.model, ctx.results
    x_max = max(res.throughput.values(), default=0.0)
    rows = {}
    for s in model.scenarios:
        demand = Counter()
        for m in s.messages:
            c = model.owner_of(m.receiver_op)
            nodes = model.nodes_of(c)
            speed = sum(model.node_map[n].speed_factor for n in nodes) / len(nodes) if nodes else 1.0
            demand[c] += m.exec_time * m.repetitions / speed
        x = res.throughput.get(s.id, 0.0)
        rows[s.id] = {
            "max_filter_demand": max(demand.values(), default=0.0),
            "throughput_shortfall": 1.0 - x / x_max if x_max > 0 else 0.0,
        }
    _emit("PipeAndFilter", rows, out)


def _empty_semi_truck(ctx: _Context, out: list) -> None:
    count = Counter()
    size = Counter()
    for s in ctx.model.scenarios:
        for m in s.messages:
            for link, share in message_routes(ctx.model, m):
                if link is None:
                    continue
                count[link] += m.repetitions * share
                size[link] += m.msg_size * m.repetitions * share
    mean = {lk: size[lk] / count[lk] for lk in count if count[lk] > 0}
    if not mean:
        return
    top = max(mean.values())
    rows = {
        lk: {"messages": float(count[lk]), "payload_shortfall": 1.0 - mean[lk] / top if top > 0 else 0.0}
        for lk in sorted(mean)
    }
    _emit("EmptySemiTruck", rows, out)


def native_formats(model: ArchitectureModel) -> dict[str, str]:
    """Most frequent data format each component exchanges (ties: alphabetical)."""
    seen: dict[str, Counter] = {}
    for s in model.scenarios:
        for m in s.messages:
            if m.data_format is None:
                continue
            ends = [model.owner_of(m.receiver_op)] + ([m.sender] if m.sender != ACTOR else [])
            for c in ends:
                seen.setdefault(c, Counter())[m.data_format] += m.repetitions
    return {c: min(cnt, key=lambda f: (-cnt[f], f)) for c, cnt in seen.items()}


def _tower_of_babel(ctx: _Context, out: list) -> None:
    model = ctx.model
    native = native_formats(model)
    if not native:
        return
    work = Counter()
    for s in model.scenarios:
        for m in s.messages:
            if m.sender == ACTOR:
                continue
            a, b = sorted((m.sender, model.owner_of(m.receiver_op)))
            if a == b:
                continue
            differ = a in native and b in native and native[a] != native[b]
            work[(a, b)] += m.exec_time * m.repetitions if differ else 0.0
    rows = {pair: {"conversion_time": float(work[pair])} for pair in sorted(work)}
    _emit("TowerOfBabel", rows, out)


def detect(model: ArchitectureModel, results: PerformanceResults, config: DetectionConfig | None = None) -> list[AntipatternInstance]:
    """All antipattern instances with positive probability, in a stable order.

    ``config`` does not change which instances are found; it only matters
    for counting.
    """
    ctx = _Context(model, results)
    out: list[AntipatternInstance] = []
    _pipe_and_filter(ctx, out)
    _blob(ctx, out)
    _cps(ctx, out)
    _extensive(ctx, out)
    _empty_semi_truck(ctx, out)
    _tower_of_babel(ctx, out)
    return out


def count_pas(instances: list[AntipatternInstance], config: DetectionConfig | None = None) -> float:
    """Number of instances at or above the threshold.

    With ``aggregate="sum"`` the probabilities of those instances are
    added instead, so the result may be fractional.
    """
    config = config or DetectionConfig()
    hits = [i.probability for i in instances if i.probability >= config.threshold]
    if config.aggregate == "sum":
        return float(sum(hits))
    return len(hits)
