"""Annotated architecture model: static, dynamic and deployment views.

The model is a self-contained replacement for UML diagrams annotated with
performance and reliability stereotypes.  It carries components and their
operations, deployment nodes and communication links, and scenarios made of
ordered synchronous messages.  Instances are immutable; transformations
always build new models.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator

import jsonschema

ACTOR = "$actor"
PROBABILITY_TOLERANCE = 1e-9


class ModelError(Exception):
    """Base class for model-level failures."""


class ParseError(ModelError):
    """The model document is not syntactically well formed."""


class ValidationError(ModelError):
    """The model violates one or more semantic invariants."""

    def __init__(self, report: "ValidationReport"):
        self.report = report
        lines = "; ".join(str(v) for v in report.violations)
        super().__init__(f"invalid model: {lines}")


class UnknownElement(ModelError, KeyError):
    """An element id does not resolve in the model."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown element"


class MissingLink(ModelError):
    """Sender and receiver are deployed on nodes without a connecting link."""


class UnresolvableBehavior(ModelError):
    """A message sequence cannot be nested into a synchronous call tree."""


@dataclass(frozen=True)
class Operation:
    id: str
    owner: str


@dataclass(frozen=True)
class Component:
    id: str
    operations: tuple[Operation, ...] = ()
    failure_prob: float = 0.0


@dataclass(frozen=True)
class Node:
    id: str
    speed_factor: float = 1.0
    deployed: tuple[str, ...] = ()


@dataclass(frozen=True)
class CommLink:
    id: str
    endpoints: tuple[str, str]
    failure_prob: float = 0.0


@dataclass(frozen=True)
class ClosedWorkload:
    population: int
    think_time: float = 0.0


@dataclass(frozen=True)
class Message:
    id: str
    sender: str
    receiver_op: str
    exec_time: float
    repetitions: float = 1.0
    msg_size: float = 0.0
    data_format: str | None = None


@dataclass(frozen=True)
class Scenario:
    id: str
    probability: float
    workload: ClosedWorkload
    messages: tuple[Message, ...]


@dataclass(frozen=True)
class Activation:
    """One execution of a received message inside a scenario call tree.

    ``parent`` is the index of the activation that sent the message, or
    ``None`` when the scenario actor sent it.
    """

    index: int
    message: Message
    component: str
    parent: int | None


@dataclass(frozen=True)
class ArchitectureModel:
    name: str
    components: tuple[Component, ...] = ()
    nodes: tuple[Node, ...] = ()
    links: tuple[CommLink, ...] = ()
    scenarios: tuple[Scenario, ...] = ()

    @cached_property
    def component_map(self) -> dict[str, Component]:
        return {c.id: c for c in self.components}

    @cached_property
    def node_map(self) -> dict[str, Node]:
        return {n.id: n for n in self.nodes}

    @cached_property
    def link_map(self) -> dict[str, CommLink]:
        return {lk.id: lk for lk in self.links}

    @cached_property
    def scenario_map(self) -> dict[str, Scenario]:
        return {s.id: s for s in self.scenarios}

    @cached_property
    def operation_map(self) -> dict[str, Operation]:
        return {op.id: op for c in self.components for op in c.operations}

    @cached_property
    def deployment(self) -> dict[str, tuple[str, ...]]:
        """Component id -> ids of the nodes deploying it (sorted)."""
        out: dict[str, list[str]] = {c.id: [] for c in self.components}
        for node in self.nodes:
            for cid in node.deployed:
                out.setdefault(cid, []).append(node.id)
        return {cid: tuple(sorted(ns)) for cid, ns in out.items()}

    @cached_property
    def _links_by_pair(self) -> dict[frozenset, CommLink]:
        pairs: dict[frozenset, CommLink] = {}
        for lk in sorted(self.links, key=lambda x: x.id):
            pairs.setdefault(frozenset(lk.endpoints), lk)
        return pairs

    @cached_property
    def weight_table(self) -> dict[str, dict[str, float]]:
        """Architectural weight of every node, component and operation."""
        out: dict[str, dict[str, float]] = {}
        for cat, table in (("node", self.node_map), ("component", self.component_map), ("operation", self.operation_map)):
            deg = {e: degree(self, e, cat) for e in table}
            top = max(deg.values(), default=0)
            out[cat] = {e: 1.0 + d / top if top else 1.0 for e, d in deg.items()}
        return out

    def owner_of(self, op_id: str) -> str:
        try:
            return self.operation_map[op_id].owner
        except KeyError:
            raise UnknownElement(f"operation {op_id!r}") from None

    def link_between(self, a: str, b: str) -> CommLink | None:
        return self._links_by_pair.get(frozenset((a, b)))

    def nodes_of(self, component_id: str) -> tuple[str, ...]:
        return self.deployment.get(component_id, ())

    @property
    def n_components(self) -> int:
        return len(self.components)

    @property
    def n_links(self) -> int:
        return len(self.links)

    @property
    def n_scenarios(self) -> int:
        return len(self.scenarios)

    def fingerprint(self) -> str:
        """Stable digest of the logical model content."""
        blob = json.dumps(model_to_dict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


# ---------------------------------------------------------------------------
# serialization

def _schema() -> dict:
    text = resources.files("perfrefactor").joinpath("data/model.schema.json").read_text()
    return json.loads(text)


_SCHEMA_VALIDATOR: jsonschema.protocols.Validator | None = None


def _schema_validator():
    global _SCHEMA_VALIDATOR
    if _SCHEMA_VALIDATOR is None:
        schema = _schema()
        cls = jsonschema.validators.validator_for(schema)
        _SCHEMA_VALIDATOR = cls(schema)
    return _SCHEMA_VALIDATOR


def schema_errors(doc: dict) -> list[str]:
    return [
        f"{'/'.join(str(p) for p in err.absolute_path) or '<root>'}: {err.message}"
        for err in _schema_validator().iter_errors(doc)
    ]


def model_from_dict(doc: dict) -> ArchitectureModel:
    """Build a model from a schema-conforming document, filling defaults."""
    errors = schema_errors(doc)
    if errors:
        raise ParseError("; ".join(errors))
    components = tuple(
        Component(
            id=c["id"],
            operations=tuple(Operation(op, c["id"]) for op in c.get("operations", [])),
            failure_prob=float(c["failure_prob"]),
        )
        for c in doc["components"]
    )
    nodes = tuple(
        Node(n["id"], float(n.get("speed_factor", 1.0)), tuple(n.get("deployed", [])))
        for n in doc["nodes"]
    )
    links = tuple(
        CommLink(lk["id"], (lk["endpoints"][0], lk["endpoints"][1]), float(lk["failure_prob"]))
        for lk in doc["links"]
    )
    scenarios = []
    for s in doc["scenarios"]:
        wl = s["workload"]
        messages = tuple(
            Message(
                id=m["id"],
                sender=m["sender"],
                receiver_op=m["receiver_op"],
                exec_time=float(m["exec_time_s"]),
                repetitions=float(m.get("rep", 1.0)),
                msg_size=float(m.get("msg_size_kb", 0.0)),
                data_format=m.get("format"),
            )
            for m in s["messages"]
        )
        scenarios.append(
            Scenario(
                s["id"],
                float(s["probability"]),
                ClosedWorkload(int(wl["population"]), float(wl.get("think_time_s", 0.0))),
                messages,
            )
        )
    return ArchitectureModel(doc["name"], components, nodes, links, tuple(scenarios))


def model_to_dict(model: ArchitectureModel) -> dict:
    def message(m: Message) -> dict:
        out = {
            "id": m.id,
            "sender": m.sender,
            "receiver_op": m.receiver_op,
            "exec_time_s": m.exec_time,
            "rep": m.repetitions,
            "msg_size_kb": m.msg_size,
        }
        if m.data_format is not None:
            out["format"] = m.data_format
        return out

    return {
        "name": model.name,
        "components": [
            {"id": c.id, "failure_prob": c.failure_prob, "operations": [op.id for op in c.operations]}
            for c in model.components
        ],
        "nodes": [
            {"id": n.id, "speed_factor": n.speed_factor, "deployed": list(n.deployed)}
            for n in model.nodes
        ],
        "links": [
            {"id": lk.id, "endpoints": list(lk.endpoints), "failure_prob": lk.failure_prob}
            for lk in model.links
        ],
        "scenarios": [
            {
                "id": s.id,
                "probability": s.probability,
                "workload": {
                    "population": s.workload.population,
                    "think_time_s": s.workload.think_time,
                },
                "messages": [message(m) for m in s.messages],
            }
            for s in model.scenarios
        ],
    }


def load_model(path: str | Path) -> ArchitectureModel:
    """Read and validate a model file.

    Raises:
        ParseError: the file is not JSON or does not match the document schema.
        ValidationError: a semantic invariant is violated.
    """
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    model = model_from_dict(doc)
    report = validate(model)
    if not report.ok:
        raise ValidationError(report)
    return model


def save_model(model: ArchitectureModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2) + "\n", encoding="utf-8")


def bundled_model_path(name: str = "ttbs") -> Path:
    return Path(str(resources.files("perfrefactor").joinpath(f"data/{name}.json")))


# ---------------------------------------------------------------------------
# validation

@dataclass(frozen=True)
class Violation:
    element: str
    rule: str
    message: str = ""

    def __str__(self) -> str:
        return f"{self.rule} [{self.element}]" + (f": {self.message}" if self.message else "")


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.violations

    def rules(self) -> set[str]:
        return {v.rule for v in self.violations}

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "violations": [
                {"element": v.element, "rule": v.rule, "message": v.message} for v in self.violations
            ],
        }


def _duplicates(ids: Iterable[str]) -> list[str]:
    seen, dup = set(), []
    for i in ids:
        if i in seen and i not in dup:
            dup.append(i)
        seen.add(i)
    return dup


def validate(model: ArchitectureModel) -> ValidationReport:
    """Check every model invariant; violations are returned, never raised."""
    out: list[Violation] = []
    add = lambda el, rule, msg="": out.append(Violation(el, rule, msg))  # noqa: E731

    for err in schema_errors(model_to_dict(model)):
        add(model.name, "schema", err)

    categories = {
        "component": [c.id for c in model.components],
        "operation": [op.id for c in model.components for op in c.operations],
        "node": [n.id for n in model.nodes],
        "link": [lk.id for lk in model.links],
        "scenario": [s.id for s in model.scenarios],
        "message": [m.id for s in model.scenarios for m in s.messages],
    }
    for cat, ids in categories.items():
        for dup in _duplicates(ids):
            add(dup, "duplicate-id", f"{cat} id used more than once")

    for c in model.components:
        if not 0.0 <= c.failure_prob <= 1.0:
            add(c.id, "probability-range", "failure_prob outside [0, 1]")
        for op in c.operations:
            if op.owner != c.id:
                add(op.id, "operation-owner", f"owner {op.owner!r} is not {c.id!r}")
        if not model.nodes_of(c.id):
            add(c.id, "undeployed-component")

    for n in model.nodes:
        if not n.speed_factor > 0:
            add(n.id, "speed-factor", "speed_factor must be positive")
        for cid in n.deployed:
            if cid not in model.component_map:
                add(n.id, "unknown-deployed-component", cid)
        for dup in _duplicates(n.deployed):
            add(n.id, "duplicate-deployment", dup)

    for lk in model.links:
        a, b = lk.endpoints
        if a == b:
            add(lk.id, "link-endpoints", "endpoints must be distinct")
        for end in (a, b):
            if end not in model.node_map:
                add(lk.id, "unknown-link-endpoint", end)
        if not 0.0 <= lk.failure_prob <= 1.0:
            add(lk.id, "probability-range", "failure_prob outside [0, 1]")

    total = 0.0
    for s in model.scenarios:
        total += s.probability
        if not 0.0 <= s.probability <= 1.0:
            add(s.id, "probability-range", "scenario probability outside [0, 1]")
        if s.workload.population < 1:
            add(s.id, "population", "population must be a positive integer")
        if s.workload.think_time < 0:
            add(s.id, "think-time", "think time must be non-negative")
        if not s.messages:
            add(s.id, "empty-scenario", "message sequence must be nonempty")
        elif s.messages[0].sender != ACTOR:
            add(s.messages[0].id, "first-message-not-from-actor")
        for m in s.messages:
            if m.receiver_op not in model.operation_map:
                add(m.id, "dangling-operation-ref", m.receiver_op)
            if m.sender != ACTOR and m.sender not in model.component_map:
                add(m.id, "unknown-sender", m.sender)
            if m.exec_time < 0:
                add(m.id, "negative-exec-time")
            if m.repetitions < 1:
                add(m.id, "repetitions-below-one")
            if m.msg_size < 0:
                add(m.id, "negative-msg-size")
    if model.scenarios and abs(total - 1.0) > PROBABILITY_TOLERANCE:
        add(model.name, "probabilities-sum", f"probabilities must sum to 1 (got {total:.12g})")
    return ValidationReport(tuple(out))


# ---------------------------------------------------------------------------
# structural queries

def call_tree(model: ArchitectureModel, scenario: Scenario) -> list[Activation]:
    """Nest a scenario's messages into a synchronous call tree.

    A message is sent by the innermost active execution of its sender; any
    executions above it on the stack are considered returned.
    """
    stack: list[tuple[str, int | None]] = [(ACTOR, None)]
    out: list[Activation] = []
    for i, msg in enumerate(scenario.messages):
        while stack and stack[-1][0] != msg.sender:
            stack.pop()
        if not stack:
            raise UnresolvableBehavior(
                f"scenario {scenario.id!r}: message {msg.id!r} sent by {msg.sender!r}, "
                "which has no active execution"
            )
        receiver = model.owner_of(msg.receiver_op)
        out.append(Activation(i, msg, receiver, stack[-1][1]))
        stack.append((receiver, i))
    return out


def degree(model: ArchitectureModel, element: str, category: str) -> int:
    """Connectivity of an element within its category.

    Nodes count their links; components count operations, hosting nodes and
    messages sent or received; operations count 1 plus their invocations.
    """
    if category == "node":
        if element not in model.node_map:
            raise UnknownElement(f"node {element!r}")
        return sum(element in lk.endpoints for lk in model.links)
    if category == "component":
        c = model.component_map[element]
        deg = len(c.operations) + len(model.nodes_of(element))
        for _, m in iter_messages(model):
            op = model.operation_map.get(m.receiver_op)
            deg += (m.sender == element) + (op is not None and op.owner == element)
        return deg
    if category == "operation":
        return 1 + sum(m.receiver_op == element for s in model.scenarios for m in s.messages)
    raise ValueError(f"unknown category {category!r}")


def category_of(model: ArchitectureModel, element: str) -> str:
    found = [
        cat
        for cat, table in (
            ("node", model.node_map),
            ("component", model.component_map),
            ("operation", model.operation_map),
        )
        if element in table
    ]
    if not found:
        raise UnknownElement(element)
    if len(found) > 1:
        raise UnknownElement(f"{element!r} is ambiguous between {found}; pass a category")
    return found[0]


def architectural_weight(model: ArchitectureModel, element: str, category: str | None = None) -> float:
    """Connectivity weight of a node, component or operation, in [1, 2].

    The weight is ``1 + degree / max_degree`` where the maximum runs over
    elements of the same category.
    """
    category = category or category_of(model, element)
    weights = model.weight_table.get(category)
    if weights is None:
        raise ValueError(f"unknown category {category!r}")
    if element not in weights:
        raise UnknownElement(f"{category} {element!r}")
    return weights[element]


Route = tuple[str | None, float]


def message_routes(model: ArchitectureModel, msg: Message) -> tuple[Route, ...]:
    """Links traversed by one message, with the share of traffic on each.

    ``None`` stands for a co-located (or actor-originated) message.  When a
    component is replicated, each sender replica prefers a local receiver
    replica and otherwise spreads evenly over remote ones.
    """
    if msg.sender == ACTOR:
        return ((None, 1.0),)
    senders = model.nodes_of(msg.sender)
    receivers = model.nodes_of(model.owner_of(msg.receiver_op))
    if not senders or not receivers:
        raise MissingLink(f"message {msg.id!r}: endpoint is not deployed")
    shares: dict[str | None, float] = {}
    for s in senders:
        w = 1.0 / len(senders)
        if s in receivers:
            shares[None] = shares.get(None, 0.0) + w
            continue
        for r in receivers:
            lk = model.link_between(s, r)
            if lk is None:
                raise MissingLink(f"message {msg.id!r}: no link between {s!r} and {r!r}")
            shares[lk.id] = shares.get(lk.id, 0.0) + w / len(receivers)
    return tuple(sorted(shares.items(), key=lambda kv: (kv[0] is not None, kv[0] or "")))


def connections_of(model: ArchitectureModel, scenario: Scenario | str) -> list[tuple[Message, tuple[Route, ...]]]:
    """Resolve, for every message of a scenario, the link(s) it travels on."""
    if isinstance(scenario, str):
        scenario = model.scenario_map[scenario]
    return [(m, message_routes(model, m)) for m in scenario.messages]


def iter_messages(model: ArchitectureModel) -> Iterator[tuple[Scenario, Message]]:
    for s in model.scenarios:
        for m in s.messages:
            yield s, m
