"""Layered queueing network structure and solver results."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property


class InvalidModel(ValueError):
    """The LQN violates a structural invariant (e.g. cyclic call graph)."""


@dataclass(frozen=True)
class Processor:
    id: str
    multiplicity: int = 1
    speed_factor: float = 1.0


@dataclass(frozen=True)
class Task:
    id: str
    processor: str | None
    multiplicity: int = 1
    kind: str = "server"  # "reference" | "server"
    think_time: float = 0.0
    scenario: str | None = None

    @property
    def is_reference(self) -> bool:
        return self.kind == "reference"


@dataclass(frozen=True)
class Entry:
    id: str
    task: str


@dataclass(frozen=True)
class SynchCall:
    target: str
    mean_calls: float


@dataclass(frozen=True)
class Activity:
    id: str
    entry: str
    host_demand: float
    calls: tuple[SynchCall, ...] = ()


@dataclass(frozen=True)
class LqnModel:
    name: str
    processors: tuple[Processor, ...]
    tasks: tuple[Task, ...]
    entries: tuple[Entry, ...]
    activities: tuple[Activity, ...]

    @cached_property
    def processor_map(self) -> dict[str, Processor]:
        return {p.id: p for p in self.processors}

    @cached_property
    def task_map(self) -> dict[str, Task]:
        return {t.id: t for t in self.tasks}

    @cached_property
    def entry_map(self) -> dict[str, Entry]:
        return {e.id: e for e in self.entries}

    @cached_property
    def entries_of(self) -> dict[str, tuple[str, ...]]:
        out: dict[str, list[str]] = {t.id: [] for t in self.tasks}
        for e in self.entries:
            out[e.task].append(e.id)
        return {k: tuple(v) for k, v in out.items()}

    @cached_property
    def activities_of(self) -> dict[str, tuple[Activity, ...]]:
        out: dict[str, list[Activity]] = {e.id: [] for e in self.entries}
        for a in self.activities:
            out[a.entry].append(a)
        return {k: tuple(v) for k, v in out.items()}

    def entry_demand(self, entry: str) -> float:
        return sum(a.host_demand for a in self.activities_of[entry])

    def entry_calls(self, entry: str) -> dict[str, float]:
        """Mean number of synchronous calls per invocation, merged by target."""
        out: dict[str, float] = {}
        for a in self.activities_of[entry]:
            for c in a.calls:
                out[c.target] = out.get(c.target, 0.0) + c.mean_calls
        return out

    @property
    def server_tasks(self) -> list[Task]:
        return [t for t in self.tasks if not t.is_reference]

    @property
    def reference_tasks(self) -> list[Task]:
        return [t for t in self.tasks if t.is_reference]

    def check(self) -> None:
        """Raise InvalidModel when a structural invariant does not hold."""
        for p in self.processors:
            if p.multiplicity < 1:
                raise InvalidModel(f"processor {p.id!r}: multiplicity must be >= 1")
        for t in self.tasks:
            if t.multiplicity < 1:
                raise InvalidModel(f"task {t.id!r}: multiplicity must be >= 1")
            if t.is_reference and not self.entries_of[t.id]:
                raise InvalidModel(f"reference task {t.id!r} has no entry")
            if not t.is_reference and t.processor not in self.processor_map:
                raise InvalidModel(f"task {t.id!r}: unknown processor {t.processor!r}")
        for e in self.entries:
            if e.task not in self.task_map:
                raise InvalidModel(f"entry {e.id!r}: unknown task {e.task!r}")
            if not self.activities_of[e.id]:
                raise InvalidModel(f"entry {e.id!r} has no activity")
        for a in self.activities:
            if a.host_demand < 0:
                raise InvalidModel(f"activity {a.id!r}: negative host demand")
            for c in a.calls:
                if c.target not in self.entry_map:
                    raise InvalidModel(f"activity {a.id!r}: unknown call target {c.target!r}")
                if c.mean_calls <= 0:
                    raise InvalidModel(f"activity {a.id!r}: mean_calls must be positive")
        self.task_layers()

    def task_layers(self) -> dict[str, int]:
        """Longest-path layer of every task; reference tasks sit on layer 0.

        Raises InvalidModel if the task-level call graph has a cycle.
        """
        callees: dict[str, set[str]] = {t.id: set() for t in self.tasks}
        for a in self.activities:
            src = self.entry_map[a.entry].task
            for c in a.calls:
                callees[src].add(self.entry_map[c.target].task)
        state: dict[str, int] = {}
        order: list[str] = []

        def visit(t: str) -> None:
            mark = state.get(t)
            if mark == 1:
                raise InvalidModel(f"cyclic call graph through task {t!r}")
            if mark == 2:
                return
            state[t] = 1
            for u in sorted(callees[t]):
                visit(u)
            state[t] = 2
            order.append(t)

        for t in sorted(callees):
            visit(t)
        layer = {t: 0 for t in callees}
        for t in reversed(order):
            for u in callees[t]:
                layer[u] = max(layer[u], layer[t] + 1)
        return layer


@dataclass
class PerformanceResults:
    """Solved indices of one LQN.

    Throughput and response time are keyed by scenario id; utilization is
    the total busy servers of each processor, in ``[0, multiplicity]``.
    """

    throughput: dict[str, float] = field(default_factory=dict)
    response_time: dict[str, float] = field(default_factory=dict)
    utilization: dict[str, float] = field(default_factory=dict)
    multiplicity: dict[str, int] = field(default_factory=dict)
    task_utilization: dict[str, float] = field(default_factory=dict)
    iterations: int = 0
    converged: bool = True

    def per_server_utilization(self, processor: str) -> float:
        return self.utilization[processor] / self.multiplicity.get(processor, 1)

    def to_dict(self) -> dict:
        return {
            "throughput": dict(self.throughput),
            "response_time": dict(self.response_time),
            "utilization": dict(self.utilization),
            "multiplicity": dict(self.multiplicity),
            "task_utilization": dict(self.task_utilization),
            "iterations": self.iterations,
            "converged": self.converged,
        }
