"""Scenario-based reliability of a component architecture.

A scenario run succeeds when every component invocation and every KB sent
over a link succeeds.  Component ``i`` fails per invocation with
probability ``theta_i``; link ``l`` fails per KB with probability
``psi_l``.  The system failure probability is the scenario-weighted mean of
the per-scenario failure probabilities.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ACTOR, ArchitectureModel, Scenario, connections_of


@dataclass
class ReliabilityReport:
    """System failure probability and the counts it is built from.

    Attributes:
        theta_s: probability that a randomly drawn scenario run fails.
        reliability: ``1 - theta_s``.
        scenario_survival: per-scenario success probability.
        components, links, scenarios: row/column labels of the matrices.
        inv_counts: invocations, shape (components, scenarios).
        msg_sizes: KB transferred, shape (links, scenarios).
    """

    theta_s: float
    reliability: float
    scenario_survival: dict[str, float] = field(default_factory=dict)
    components: list[str] = field(default_factory=list)
    links: list[str] = field(default_factory=list)
    scenarios: list[str] = field(default_factory=list)
    inv_counts: np.ndarray = field(default_factory=lambda: np.zeros((0, 0), dtype=int))
    msg_sizes: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    def to_dict(self) -> dict:
        return {
            "theta_s": self.theta_s,
            "reliability": self.reliability,
            "scenario_survival": dict(self.scenario_survival),
            "inv_counts": {
                c: {s: int(self.inv_counts[i, j]) for j, s in enumerate(self.scenarios)}
                for i, c in enumerate(self.components)
            },
            "msg_sizes": {
                lk: {s: float(self.msg_sizes[i, j]) for j, s in enumerate(self.scenarios)}
                for i, lk in enumerate(self.links)
            },
        }


def _scenario(model: ArchitectureModel, scenario: Scenario | str) -> Scenario:
    return model.scenario_map[scenario] if isinstance(scenario, str) else scenario


def inv_counts(model: ArchitectureModel, scenario: Scenario | str) -> dict[str, int]:
    """Invocations of every component in one scenario (rounded repetitions)."""
    scen = _scenario(model, scenario)
    counts = {c.id: 0 for c in model.components}
    for msg in scen.messages:
        counts[model.owner_of(msg.receiver_op)] += int(round(msg.repetitions))
    return counts


def msg_sizes(model: ArchitectureModel, scenario: Scenario | str) -> dict[str, float]:
    """KB carried by every link in one scenario.

    Raises:
        MissingLink: two communicating nodes are not connected.
    """
    scen = _scenario(model, scenario)
    sizes = {lk.id: 0.0 for lk in model.links}
    for msg, routes in connections_of(model, scen):
        if msg.sender == ACTOR:
            continue
        for link_id, share in routes:
            if link_id is not None:
                sizes[link_id] += msg.msg_size * msg.repetitions * share
    return sizes


def evaluate_reliability(model: ArchitectureModel) -> ReliabilityReport:
    """Failure probability of the model and the matrices behind it."""
    comps = [c.id for c in model.components]
    links = [lk.id for lk in model.links]
    scens = [s.id for s in model.scenarios]
    theta = np.array([c.failure_prob for c in model.components])
    psi = np.array([lk.failure_prob for lk in model.links])
    inv = np.zeros((len(comps), len(scens)), dtype=int)
    size = np.zeros((len(links), len(scens)))
    survival: dict[str, float] = {}
    success = 0.0
    for j, scen in enumerate(model.scenarios):
        ic = inv_counts(model, scen)
        ms = msg_sizes(model, scen)
        inv[:, j] = [ic[c] for c in comps]
        size[:, j] = [ms[lk] for lk in links]
        ok = float(np.prod((1.0 - theta) ** inv[:, j]) * np.prod((1.0 - psi) ** size[:, j]))
        survival[scen.id] = ok
        success += scen.probability * ok
    theta_s = min(1.0, max(0.0, 1.0 - success))
    return ReliabilityReport(theta_s, 1.0 - theta_s, survival, comps, links, scens, inv, size)
