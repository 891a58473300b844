"""Refactoring actions, sequence feasibility and architectural distance.

Every action is a pure function from a model to a new model.  Its
precondition is an executable predicate on the model it is applied to, and
a sequence is feasible when each action's precondition holds on the state
left by the actions before it.

Created elements get deterministic names with the smallest free suffix:
``<node>_clone<k>`` for cloned nodes (links ``<link>_clone<k>``),
``<op>_comp<k>`` / ``<op>_node<k>`` for split-off operations and
``<component>_node<k>`` for redeployed components.  New links are named
``link_<a>_<b>``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .model import (
    ACTOR,
    ArchitectureModel,
    CommLink,
    Component,
    ModelError,
    Node,
    Operation,
    UnknownElement,
    UnresolvableBehavior,
    architectural_weight,
    call_tree,
)

CLONE_NODE = "CloneNode"
MOVE_OP_NEW_COMP_NEW_NODE = "MoveOpNewCompNewNode"
MOVE_OP_TO_COMP = "MoveOpToComp"
DEPLOY_COMP_NEW_NODE = "DeployCompNewNode"
KINDS = (CLONE_NODE, MOVE_OP_NEW_COMP_NEW_NODE, MOVE_OP_TO_COMP, DEPLOY_COMP_NEW_NODE)

DEFAULT_BRF = {
    CLONE_NODE: 1.23,
    MOVE_OP_NEW_COMP_NEW_NODE: 1.80,
    MOVE_OP_TO_COMP: 1.64,
    DEPLOY_COMP_NEW_NODE: 1.45,
}
TARGET_CATEGORY = {
    CLONE_NODE: "node",
    MOVE_OP_NEW_COMP_NEW_NODE: "operation",
    MOVE_OP_TO_COMP: "operation",
    DEPLOY_COMP_NEW_NODE: "component",
}
MAX_SAMPLING_ATTEMPTS = 100


class PreconditionViolated(ModelError):
    pass


class NoEligibleTarget(ModelError):
    pass


@dataclass(frozen=True)
class RefactoringAction:
    kind: str
    target: str
    aux_target: str | None = None
    brf: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown refactoring kind {self.kind!r}")
        if (self.kind == MOVE_OP_TO_COMP) != (self.aux_target is not None):
            raise ValueError(f"{self.kind} {'needs' if self.kind == MOVE_OP_TO_COMP else 'takes no'} aux_target")
        if self.brf is None:
            object.__setattr__(self, "brf", DEFAULT_BRF[self.kind])
        if not self.brf > 0:
            raise ValueError("brf must be positive")

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "target": self.target}
        if self.aux_target is not None:
            out["aux_target"] = self.aux_target
        if self.brf != DEFAULT_BRF[self.kind]:
            out["brf"] = self.brf
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "RefactoringAction":
        try:
            return cls(doc["kind"], doc["target"], doc.get("aux_target"), doc.get("brf"))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed action {doc!r}") from exc

    def __str__(self) -> str:
        aux = f"->{self.aux_target}" if self.aux_target else ""
        return f"{self.kind}({self.target}{aux})"


@dataclass(frozen=True)
class RefactoringSequence:
    actions: tuple[RefactoringAction, ...] = ()

    def __len__(self) -> int:
        return len(self.actions)

    def __iter__(self):
        return iter(self.actions)

    def __getitem__(self, i):
        return self.actions[i]

    def to_list(self) -> list[dict]:
        return [a.to_dict() for a in self.actions]

    def to_json(self) -> str:
        """Canonical compact JSON; also the evaluation cache key."""
        return json.dumps(self.to_list(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_list(cls, docs: Iterable[dict]) -> "RefactoringSequence":
        return cls(tuple(RefactoringAction.from_dict(d) for d in docs))

    @classmethod
    def from_json(cls, text: str) -> "RefactoringSequence":
        doc = json.loads(text)
        if isinstance(doc, dict):
            doc = doc.get("actions", doc.get("sequence"))
        if not isinstance(doc, list):
            raise ValueError("a sequence is a JSON list of actions")
        return cls.from_list(doc)


# ---------------------------------------------------------------------------
# naming and model surgery helpers


def _free_suffix(taken: Iterable[str], *patterns: str) -> int:
    used = set(taken)
    k = 1
    while any(p.format(k=k) in used for p in patterns):
        k += 1
    return k


def _mean(values: Sequence[float], default: float = 0.0) -> float:
    return float(sum(values) / len(values)) if values else default


def _link_id(model_ids: set[str], a: str, b: str) -> str:
    base = f"link_{a}_{b}"
    lid, k = base, 1
    while lid in model_ids:
        k += 1
        lid = f"{base}_{k}"
    return lid


def _add_links(model: ArchitectureModel, node: str, peers: dict[str, float]) -> tuple[CommLink, ...]:
    """Links from ``node`` to each peer not already connected, with the given psi."""
    ids = {lk.id for lk in model.links}
    new = []
    for peer in sorted(peers):
        if peer == node or model.link_between(node, peer) is not None:
            continue
        lid = _link_id(ids, node, peer)
        ids.add(lid)
        new.append(CommLink(lid, (node, peer), peers[peer]))
    return model.links + tuple(new)


def _link_psi(model: ArchitectureModel, a: str, b: str, fallback: float) -> float:
    lk = model.link_between(a, b)
    return lk.failure_prob if lk is not None else fallback


def _global_psi(model: ArchitectureModel) -> float:
    return _mean([lk.failure_prob for lk in model.links])


def _node_psi(model: ArchitectureModel, node: str) -> float:
    own = [lk.failure_prob for lk in model.links if node in lk.endpoints]
    return _mean(own, _global_psi(model))


def _neighbours(model: ArchitectureModel, node: str) -> list[str]:
    return sorted({e for lk in model.links if node in lk.endpoints for e in lk.endpoints if e != node})


def _op_partners(model: ArchitectureModel, op: str) -> tuple[set[str], set[tuple[int, int]]]:
    """Components talking to ``op``, and the messages its executions send.

    Messages are identified by (scenario index, message index).
    """
    partners: set[str] = set()
    sent: set[tuple[int, int]] = set()
    for si, scen in enumerate(model.scenarios):
        tree = call_tree(model, scen)
        for act in tree:
            msg = act.message
            if msg.receiver_op == op and msg.sender != ACTOR:
                partners.add(msg.sender)
            if act.parent is not None and tree[act.parent].message.receiver_op == op:
                sent.add((si, act.index))
                partners.add(act.component)
    return partners, sent


def _move_operation(model: ArchitectureModel, op: str, dest: str, extra_components=(), extra_nodes=()) -> ArchitectureModel:
    """Rehome ``op`` on ``dest`` and make ``dest`` the sender of what ``op`` sends.

    The old owner is dropped, together with its deployments, when it is
    left without operations.
    """
    src = model.owner_of(op)
    _, sent = _op_partners(model, op)
    scenarios = tuple(
        replace(s, messages=tuple(
            replace(m, sender=dest) if (si, mi) in sent else m for mi, m in enumerate(s.messages)
        ))
        for si, s in enumerate(model.scenarios)
    )
    comps = []
    dropped = None
    for c in model.components + tuple(extra_components):
        ops = tuple(o for o in c.operations if o.id != op)
        if c.id == dest:
            ops = ops + (Operation(op, dest),)
        if c.id == src and not ops:
            dropped = c.id
            continue
        comps.append(replace(c, operations=ops))
    nodes = tuple(
        replace(n, deployed=tuple(d for d in n.deployed if d != dropped)) for n in model.nodes + tuple(extra_nodes)
    )
    return replace(model, components=tuple(comps), nodes=nodes, scenarios=scenarios)


def _same_behaviour(a: ArchitectureModel, b: ArchitectureModel) -> bool:
    """Same messages in the same order, nested the same way."""
    for sa, sb in zip(a.scenarios, b.scenarios):
        strip = lambda m: (m.id, m.receiver_op, m.exec_time, m.repetitions, m.msg_size, m.data_format)  # noqa: E731
        if [strip(m) for m in sa.messages] != [strip(m) for m in sb.messages]:
            return False
        try:
            if [x.parent for x in call_tree(a, sa)] != [x.parent for x in call_tree(b, sb)]:
                return False
        except UnresolvableBehavior:
            return False
    return True


def _connect_communicating(model: ArchitectureModel) -> ArchitectureModel:
    """Add a link (mean psi) for any communicating node pair that lacks one."""
    need: set[tuple[str, str]] = set()
    for s in model.scenarios:
        for m in s.messages:
            if m.sender == ACTOR:
                continue
            for a in model.nodes_of(m.sender):
                for b in model.nodes_of(model.owner_of(m.receiver_op)):
                    if a != b and model.link_between(a, b) is None:
                        need.add(tuple(sorted((a, b))))
    if not need:
        return model
    psi = _global_psi(model)
    ids = {lk.id for lk in model.links}
    links = list(model.links)
    for a, b in sorted(need):
        lid = _link_id(ids, a, b)
        ids.add(lid)
        links.append(CommLink(lid, (a, b), psi))
    return replace(model, links=tuple(links))


# ---------------------------------------------------------------------------
# the four actions


def _clone_node(model: ArchitectureModel, node_id: str) -> ArchitectureModel:
    node = model.node_map[node_id]
    k = _free_suffix(
        [n.id for n in model.nodes] + [lk.id for lk in model.links],
        f"{node_id}_clone{{k}}",
        *[f"{lk.id}_clone{{k}}" for lk in model.links if node_id in lk.endpoints],
    )
    clone = replace(node, id=f"{node_id}_clone{k}")
    links = list(model.links)
    for lk in model.links:
        if node_id in lk.endpoints:
            other = lk.endpoints[1] if lk.endpoints[0] == node_id else lk.endpoints[0]
            links.append(CommLink(f"{lk.id}_clone{k}", (clone.id, other), lk.failure_prob))
    return replace(model, nodes=model.nodes + (clone,), links=tuple(links))


def _move_op_new_comp_new_node(model: ArchitectureModel, op: str) -> ArchitectureModel:
    owner = model.component_map[model.owner_of(op)]
    taken = [c.id for c in model.components] + [n.id for n in model.nodes]
    k = _free_suffix(taken, f"{op}_comp{{k}}", f"{op}_node{{k}}")
    comp = Component(f"{op}_comp{k}", (), owner.failure_prob)
    home = model.nodes_of(owner.id)
    speed = _mean([model.node_map[n].speed_factor for n in home], 1.0)
    node = Node(f"{op}_node{k}", speed, (comp.id,))
    partners, _ = _op_partners(model, op)
    peers: dict[str, float] = {}
    for n in home:
        peers[n] = _node_psi(model, n)
    for c in sorted(partners - {owner.id}):
        for n in model.nodes_of(c):
            peers.setdefault(n, _mean([_link_psi(model, h, n, _global_psi(model)) for h in home], _global_psi(model)))
    moved = _move_operation(model, op, comp.id, extra_components=(comp,), extra_nodes=(node,))
    return replace(moved, links=_add_links(moved, node.id, peers))


def _deploy_comp_new_node(model: ArchitectureModel, comp_id: str) -> ArchitectureModel:
    old = model.nodes_of(comp_id)
    taken = [n.id for n in model.nodes]
    k = _free_suffix(taken, f"{comp_id}_node{{k}}")
    speed = _mean([model.node_map[n].speed_factor for n in old], 1.0)
    node = Node(f"{comp_id}_node{k}", speed, (comp_id,))
    peers: dict[str, float] = {}
    for n in old:
        peers[n] = _node_psi(model, n)
    for n in old:
        for nb in _neighbours(model, n):
            if nb not in peers:
                peers[nb] = _link_psi(model, n, nb, _global_psi(model))
    nodes = tuple(replace(n, deployed=tuple(d for d in n.deployed if d != comp_id)) for n in model.nodes) + (node,)
    moved = replace(model, nodes=nodes)
    return replace(moved, links=_add_links(moved, node.id, peers))


# ---------------------------------------------------------------------------
# public operations


def _structurally_allowed(action: RefactoringAction, model: ArchitectureModel) -> bool:
    if action.kind == CLONE_NODE:
        return action.target in model.node_map
    if action.kind == MOVE_OP_NEW_COMP_NEW_NODE:
        return action.target in model.operation_map
    if action.kind == MOVE_OP_TO_COMP:
        return (
            action.target in model.operation_map
            and action.aux_target in model.component_map
            and model.owner_of(action.target) != action.aux_target
        )
    return action.target in model.component_map and bool(model.nodes_of(action.target))


def _apply_unchecked(action: RefactoringAction, model: ArchitectureModel) -> ArchitectureModel:
    if action.kind == CLONE_NODE:
        out = _clone_node(model, action.target)
    elif action.kind == MOVE_OP_NEW_COMP_NEW_NODE:
        out = _move_op_new_comp_new_node(model, action.target)
    elif action.kind == MOVE_OP_TO_COMP:
        out = _move_operation(model, action.target, action.aux_target)
    else:
        out = _deploy_comp_new_node(model, action.target)
    # every communicating node pair must stay reachable
    return _connect_communicating(out)


def _try_apply(action: RefactoringAction, model: ArchitectureModel) -> ArchitectureModel | None:
    if not _structurally_allowed(action, model):
        return None
    try:
        out = _apply_unchecked(action, model)
    except (UnresolvableBehavior, UnknownElement):
        return None
    if action.kind in (MOVE_OP_NEW_COMP_NEW_NODE, MOVE_OP_TO_COMP) and not _same_behaviour(model, out):
        return None
    return out


def precondition(action: RefactoringAction, model: ArchitectureModel) -> bool:
    """Whether ``action`` may be applied to ``model``.

    Beyond the existence checks of each kind (target present; for a move,
    destination present and different from the current owner), an
    operation may only move when every scenario keeps its call nesting.
    """
    return _try_apply(action, model) is not None


def apply(action: RefactoringAction, model: ArchitectureModel) -> ArchitectureModel:
    """Return the refactored model; the input is left untouched.

    Raises:
        PreconditionViolated: the action is not applicable to ``model``.
    """
    out = _try_apply(action, model)
    if out is None:
        raise PreconditionViolated(f"{action} is not applicable to model {model.name!r}")
    return out


def fold(sequence: RefactoringSequence | Sequence[RefactoringAction], model: ArchitectureModel) -> ArchitectureModel | None:
    """Apply actions left to right; ``None`` as soon as one is not applicable."""
    for action in sequence:
        model = _try_apply(action, model)
        if model is None:
            return None
    return model


def feasible(sequence: RefactoringSequence | Sequence[RefactoringAction], model: ArchitectureModel) -> bool:
    return fold(sequence, model) is not None


def apply_sequence(sequence: RefactoringSequence | Sequence[RefactoringAction], model: ArchitectureModel) -> ArchitectureModel:
    """Fold-apply a sequence.

    Raises:
        PreconditionViolated: naming the first inapplicable action.
    """
    for i, action in enumerate(sequence):
        nxt = _try_apply(action, model)
        if nxt is None:
            raise PreconditionViolated(f"action {i} ({action}) is not applicable")
        model = nxt
    return model


def weighted_distance(pairs: Iterable[tuple[float, float]]) -> float:
    """Sum of ``brf * weight`` over (brf, weight) pairs."""
    return float(sum(b * w for b, w in pairs))


def arch_dist(sequence: RefactoringSequence | Sequence[RefactoringAction], model: ArchitectureModel) -> float:
    """Refactoring effort of a sequence, weighted on the initial model.

    A target created by an earlier action of the same sequence (a clone, a
    split-off component or its node) has no weight in ``model``; it is
    weighted on the state the action is applied to instead.

    Raises:
        UnknownElement: a target exists neither in ``model`` nor in the
            state its action is applied to.
    """
    actions = list(sequence)
    pairs = []
    for i, a in enumerate(actions):
        category = TARGET_CATEGORY[a.kind]
        if a.target in model.weight_table.get(category, {}):
            weight = architectural_weight(model, a.target, category)
        else:
            state = fold(actions[:i], model) if i else None
            if state is None:
                raise UnknownElement(f"{category} {a.target!r}")
            weight = architectural_weight(state, a.target, category)
        pairs.append((a.brf, weight))
    return weighted_distance(pairs)


def eligible_targets(kind: str, model: ArchitectureModel) -> list[tuple[str, str | None]]:
    """All (target, aux_target) pairs passing the existence checks for ``kind``."""
    if kind == CLONE_NODE:
        return [(n.id, None) for n in model.nodes]
    if kind == MOVE_OP_NEW_COMP_NEW_NODE:
        return [(op, None) for op in model.operation_map]
    if kind == DEPLOY_COMP_NEW_NODE:
        return [(c.id, None) for c in model.components if model.nodes_of(c.id)]
    return [
        (op, c.id)
        for op, o in model.operation_map.items()
        for c in model.components
        if c.id != o.owner
    ]


def random_action(model: ArchitectureModel, rng: np.random.Generator, brf: dict[str, float] | None = None) -> RefactoringAction:
    """Draw an applicable action: kind uniform over kinds that have targets, then target uniform.

    Raises:
        NoEligibleTarget: nothing applicable after repeated sampling.
    """
    brf = {**DEFAULT_BRF, **(brf or {})}
    pools = {k: eligible_targets(k, model) for k in KINDS}
    kinds = [k for k in KINDS if pools[k]]
    attempts = 0
    while kinds and attempts < MAX_SAMPLING_ATTEMPTS:
        kind = kinds[int(rng.integers(len(kinds)))]
        pool = pools[kind]
        # try targets of the drawn kind in random order so kinds stay uniform
        for i in rng.permutation(len(pool)):
            attempts += 1
            target, aux = pool[int(i)]
            action = RefactoringAction(kind, target, aux, brf[kind])
            if precondition(action, model):
                return action
            if attempts >= MAX_SAMPLING_ATTEMPTS:
                break
        else:
            kinds.remove(kind)
    raise NoEligibleTarget(f"no applicable action on model {model.name!r}")
