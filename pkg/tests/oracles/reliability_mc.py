"""Monte-Carlo failure sampling for the scenario reliability model.

Each sample draws a scenario, then walks its messages: the receiving
component fails independently on each of its ``round(rep)`` invocations,
and every KB a message carries across a link fails independently.  KB
sizes must therefore be integers.  Links are resolved directly from the
deployment, without the engine's routing helpers.
"""

from __future__ import annotations

import numpy as np

ACTOR = "$actor"


def _home(doc: dict) -> dict[str, str]:
    home = {}
    for n in doc["nodes"]:
        for c in n["deployed"]:
            assert c not in home, "oracle supports single deployment only"
            home[c] = n["id"]
    return home


def mc_reliability(doc: dict, samples: int, rng: np.random.Generator) -> float:
    owner = {op: c["id"] for c in doc["components"] for op in c["operations"]}
    theta = {c["id"]: c["failure_prob"] for c in doc["components"]}
    home = _home(doc)
    link = {frozenset(lk["endpoints"]): lk["failure_prob"] for lk in doc["links"]}
    probs = np.array([s["probability"] for s in doc["scenarios"]])
    counts = rng.multinomial(samples, probs / probs.sum())
    ok_total = 0
    for scen, n in zip(doc["scenarios"], counts):
        alive = np.ones(n, dtype=bool)
        for m in scen["messages"]:
            recv = owner[m["receiver_op"]]
            k = int(round(m["rep"]))
            alive &= rng.binomial(k, theta[recv], size=n) == 0
            if m["sender"] != ACTOR and home[m["sender"]] != home[recv]:
                psi = link[frozenset((home[m["sender"]], home[recv]))]
                kb = m["msg_size_kb"] * m["rep"]
                assert float(kb).is_integer(), "oracle needs whole KB"
                alive &= rng.binomial(int(kb), psi, size=n) == 0
        ok_total += int(alive.sum())
    return ok_total / samples
