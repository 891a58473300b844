"""Random architecture models and LQNs for property and oracle tests."""

from __future__ import annotations

import numpy as np

from perfrefactor.lqn.model import Activity, Entry, LqnModel, Processor, SynchCall, Task
from perfrefactor.model import ACTOR, ArchitectureModel, model_from_dict


def random_architecture_doc(
    rng: np.random.Generator,
    max_components: int = 4,
    max_links: int = 3,
    max_scenarios: int = 3,
    max_messages: int = 6,
    integer_sizes: bool = True,
    formats: bool = False,
) -> dict:
    """A valid model document.

    Components are ordered and a component only calls components after it,
    so the call graph is acyclic.  Node count is capped so that the links
    between communicating nodes never exceed ``max_links``.
    """
    n_comp = int(rng.integers(1, max_components + 1))
    comps = [f"c{i}" for i in range(n_comp)]
    ops = {c: [f"{c}_op{k}" for k in range(int(rng.integers(1, 3)))] for c in comps}
    max_nodes = 1
    while (max_nodes + 1) * max_nodes // 2 <= max_links and max_nodes < n_comp:
        max_nodes += 1
    n_nodes = int(rng.integers(1, max_nodes + 1))
    home = {c: (i if i < n_nodes else int(rng.integers(n_nodes))) for i, c in enumerate(comps)}
    nodes = [
        {"id": f"n{k}", "speed_factor": float(rng.choice([0.5, 1.0, 2.0])), "deployed": [c for c in comps if home[c] == k]}
        for k in range(n_nodes)
    ]
    fmt_of = {c: str(rng.choice(["json", "xml"])) for c in comps}

    n_scen = int(rng.integers(1, max_scenarios + 1))
    probs = rng.dirichlet(np.ones(n_scen))
    probs = [float(p) for p in probs[:-1]]
    probs.append(1.0 - sum(probs))
    scenarios = []
    pairs: set[tuple[int, int]] = set()
    for j in range(n_scen):
        msgs = []
        stack = [ACTOR]
        for k in range(int(rng.integers(1, max_messages + 1))):
            depth = int(rng.integers(len(stack)))
            stack = stack[: depth + 1]
            sender = stack[-1]
            lo = 0 if sender == ACTOR else comps.index(sender) + 1
            if lo >= n_comp:
                stack = [ACTOR]
                sender, lo = ACTOR, 0
            if k == 0:
                sender, lo, stack = ACTOR, 0, [ACTOR]
            receiver = comps[int(rng.integers(lo, n_comp))]
            size = float(rng.integers(0, 5)) if integer_sizes else float(rng.uniform(0, 4))
            msg = {
                "id": f"s{j}m{k}",
                "sender": sender,
                "receiver_op": str(rng.choice(ops[receiver])),
                "exec_time_s": float(rng.uniform(0.001, 0.05)),
                "rep": float(rng.integers(1, 4)),
                "msg_size_kb": size,
            }
            if formats:
                msg["format"] = fmt_of[receiver]
            msgs.append(msg)
            if sender != ACTOR and home[sender] != home[receiver]:
                pairs.add(tuple(sorted((home[sender], home[receiver]))))
            stack.append(receiver)
        scenarios.append({
            "id": f"s{j}",
            "probability": probs[j],
            "workload": {"population": int(rng.integers(1, 6)), "think_time_s": float(rng.uniform(0.5, 3.0))},
            "messages": msgs,
        })
    links = [
        {"id": f"l{a}{b}", "endpoints": [f"n{a}", f"n{b}"], "failure_prob": float(rng.uniform(0.0, 0.02))}
        for a, b in sorted(pairs)
    ]
    return {
        "name": "random",
        "components": [
            {"id": c, "failure_prob": float(rng.uniform(0.0, 0.05)), "operations": ops[c]} for c in comps
        ],
        "nodes": nodes,
        "links": links,
        "scenarios": scenarios,
    }


def random_architecture(rng: np.random.Generator, **kw) -> ArchitectureModel:
    return model_from_dict(random_architecture_doc(rng, **kw))


def random_lqn(rng: np.random.Generator, layers: int, single_threaded: bool = False) -> LqnModel:
    """Random 2-3 layer LQN: one or two server tasks per layer, each on its own processor.

    Every task calls each task of the next layer with probability 0.8 (the
    first always), 1-2 times; one or two reference tasks with 1-7 customers
    call the top layer.  With ``single_threaded`` every server task has one
    thread, otherwise 30% of them get two.
    """
    procs, tasks, entries, acts = [], [], [], []
    nref = rng.integers(1, 3)
    layer_tasks = []
    for k in range(1, layers + 1):
        lt = []
        for i in range(rng.integers(1, 3)):
            tid, pid = f"T{k}{i}", f"P{k}{i}"
            procs.append(Processor(pid, 1))
            tasks.append(Task(tid, pid, 1 if (rng.random() < 0.7 or single_threaded) else 2))
            lt.append(tid)
        layer_tasks.append(lt)
    ent = {}
    for lt in layer_tasks:
        for t in lt:
            ent[t] = f"{t}_e"
            entries.append(Entry(ent[t], t))
    for k, lt in enumerate(layer_tasks):
        for t in lt:
            calls = []
            if k + 1 < len(layer_tasks):
                for t2 in layer_tasks[k + 1]:
                    if rng.random() < 0.8 or t == lt[0]:
                        calls.append(SynchCall(ent[t2], float(rng.integers(1, 3))))
            acts.append(Activity(ent[t] + "_a", ent[t], float(rng.uniform(0.02, 0.15)), tuple(calls)))
    for r in range(nref):
        rid = f"R{r}"
        tasks.append(Task(rid, None, int(rng.integers(1, 8)), "reference", float(rng.uniform(0.5, 3)), f"s{r}"))
        entries.append(Entry(rid + "_e", rid))
        cs = [SynchCall(ent[t], 1.0) for t in layer_tasks[0] if rng.random() < 0.8 or r == 0]
        acts.append(Activity(rid + "_e_a", rid + "_e", 0.0, tuple(cs)))
    return LqnModel("random", tuple(procs), tuple(tasks), tuple(entries), tuple(acts))


def single_layer_lqn(populations, think_times, demands, name: str = "flat") -> LqnModel:
    """Reference tasks calling single-threaded leaf tasks, one per processor.

    ``demands[c][k]`` is the demand chain ``c`` places on station ``k`` per
    cycle (0 for no call).  Each station is a leaf task with one entry per
    calling chain, so the network is a product-form closed QN.
    """
    C, K = len(populations), len(demands[0])
    procs = tuple(Processor(f"P{k}", 1) for k in range(K))
    tasks = [Task(f"S{k}", f"P{k}", 1) for k in range(K)]
    entries, acts = [], []
    for k in range(K):
        for c in range(C):
            if demands[c][k] > 0:
                e = f"S{k}_c{c}"
                entries.append(Entry(e, f"S{k}"))
                acts.append(Activity(e + "_a", e, float(demands[c][k]), ()))
    for c in range(C):
        rid = f"R{c}"
        tasks.append(Task(rid, None, int(populations[c]), "reference", float(think_times[c]), f"s{c}"))
        entries.append(Entry(rid + "_e", rid))
        calls = tuple(SynchCall(f"S{k}_c{c}", 1.0) for k in range(K) if demands[c][k] > 0)
        acts.append(Activity(rid + "_e_a", rid + "_e", 0.0, calls))
    return LqnModel(name, procs, tuple(tasks), tuple(entries), tuple(acts))
