"""Architecture model to layered queueing network.

Mapping:
    Node              -> processor (nodes sharing a replicated component
                         collapse into one processor with multiplicity > 1)
    Component         -> server task (multiplicity = number of replicas)
    scenario actor    -> reference task (multiplicity = closed population)
    message reception -> entry holding one activity
    message           -> activity demand (exec time / node speed) plus a
                         synch-call from the sender's entry
"""

from __future__ import annotations

from ..model import ACTOR, ArchitectureModel, call_tree
from .model import Activity, Entry, LqnModel, Processor, SynchCall, Task


def reference_task_id(scenario_id: str) -> str:
    return f"ref:{scenario_id}"


def interacting_components(model: ArchitectureModel) -> list[str]:
    """Components that receive at least one message, in model order."""
    hit = {model.owner_of(m.receiver_op) for s in model.scenarios for m in s.messages}
    return [c.id for c in model.components if c.id in hit]


def processor_groups(model: ArchitectureModel, components: list[str]) -> dict[str, str]:
    """Map each node hosting one of ``components`` to its processor id.

    Nodes that deploy a common component end up in the same group; the
    group is named after its lexicographically smallest node.
    """
    parent: dict[str, str] = {}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for cid in components:
        nodes = model.nodes_of(cid)
        for n in nodes:
            parent.setdefault(n, n)
        for n in nodes[1:]:
            a, b = find(nodes[0]), find(n)
            if a != b:
                parent[max(a, b)] = min(a, b)
    return {n: find(n) for n in parent}


def transform(model: ArchitectureModel) -> LqnModel:
    """Build the LQN of a valid model.

    Raises:
        UnresolvableBehavior: a scenario cannot be nested into a call tree.
        InvalidModel: the resulting task graph is cyclic.
    """
    comps = interacting_components(model)
    group = processor_groups(model, comps)

    members: dict[str, list[str]] = {}
    for node, gid in group.items():
        members.setdefault(gid, []).append(node)
    processors = []
    speed: dict[str, float] = {}
    for gid in sorted(members):
        nodes = members[gid]
        s = sum(model.node_map[n].speed_factor for n in nodes) / len(nodes)
        speed[gid] = s
        processors.append(Processor(gid, len(nodes), s))

    tasks = [
        Task(cid, group[model.nodes_of(cid)[0]], len(model.nodes_of(cid)), "server")
        for cid in comps
    ]
    entries: list[Entry] = []
    demand: dict[str, float] = {}
    calls: dict[str, dict[str, float]] = {}

    for scen in model.scenarios:
        ref = reference_task_id(scen.id)
        tasks.append(
            Task(ref, None, scen.workload.population, "reference", scen.workload.think_time, scen.id)
        )
        ref_entry = f"{ref}/entry"
        entries.append(Entry(ref_entry, ref))
        demand[ref_entry] = 0.0
        calls[ref_entry] = {}
        # activation index -> (entry id, executions per entry invocation, component)
        placed: dict[int, tuple[str, float, str]] = {}
        for act in call_tree(model, scen):
            msg = act.message
            if act.parent is None:
                p_entry, p_mult, p_comp = ref_entry, 1.0, ACTOR
            else:
                p_entry, p_mult, p_comp = placed[act.parent]
            proc_speed = speed[group[model.nodes_of(act.component)[0]]]
            if act.component == p_comp:
                mult = p_mult * msg.repetitions
                demand[p_entry] += msg.exec_time / proc_speed * mult
                placed[act.index] = (p_entry, mult, p_comp)
                continue
            eid = f"{act.component}/{msg.id}"
            entries.append(Entry(eid, act.component))
            demand[eid] = msg.exec_time / proc_speed
            calls[eid] = {}
            calls[p_entry][eid] = calls[p_entry].get(eid, 0.0) + msg.repetitions * p_mult
            placed[act.index] = (eid, 1.0, act.component)

    activities = tuple(
        Activity(
            f"{e.id}/a",
            e.id,
            demand[e.id],
            tuple(SynchCall(t, y) for t, y in calls[e.id].items()),
        )
        for e in entries
    )
    lqn = LqnModel(model.name, tuple(processors), tuple(tasks), tuple(entries), activities)
    lqn.check()
    return lqn
