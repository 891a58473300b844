"""Layered solution of an LQN by decomposition into closed submodels.

Tasks are assigned to layers by longest call path from the reference tasks.
Every layer ``k >= 1`` yields software submodels whose stations are the
layer's tasks and whose chains are their direct callers; every processor
yields a device submodel whose chains are the tasks it hosts.  A caller
task with ``m`` threads is a chain of population ``m`` whose think time is
the part of its cycle spent outside the submodel.

One outer iteration:

1. entry holding times are rebuilt bottom-up from processor residence and
   the waiting seen at called tasks;
2. each software submodel is advanced one approximate MVA step, giving the
   waiting time each caller experiences at each called task and the
   throughput of the reference chains;
3. each device submodel gives processor residence times;
4. new waiting times are blended with the previous ones (under-relaxation).

Iteration stops when no utilization moves by more than the tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import networkx as nx
import numpy as np

from .model import LqnModel, PerformanceResults
from .mva import LinearizerState


@dataclass(frozen=True)
class SolverOptions:
    tolerance: float = 1e-4
    max_iters: int = 100
    relaxation: float = 0.5
    method: str = "linearizer"


class _Submodel:
    """Chains (caller tasks) x stations (tasks or processors) of one submodel."""

    def __init__(self, chains: list[str], stations: list[str], method: str):
        self.chains = chains
        self.stations = stations
        self.state = LinearizerState(len(chains), len(stations), method)


def _components(pairs: set[tuple[str, str]]) -> list[tuple[list[str], list[str]]]:
    """Connected components of a bipartite chain/station relation."""
    chains = sorted({u for u, _ in pairs})
    stations = sorted({t for _, t in pairs})
    parent = {("c", u): ("c", u) for u in chains} | {("s", t): ("s", t) for t in stations}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u, t in sorted(pairs):
        a, b = find(("c", u)), find(("s", t))
        if a != b:
            parent[max(a, b)] = min(a, b)
    groups: dict = {}
    for key in sorted(parent):
        groups.setdefault(find(key), ([], []))
        groups[find(key)][0 if key[0] == "c" else 1].append(key[1])
    return [g for _, g in sorted(groups.items())]


class LayeredSolver:
    def __init__(self, lqn: LqnModel, opts: SolverOptions | None = None):
        lqn.check()
        self.lqn = lqn
        self.opts = opts or SolverOptions()
        self.layer = lqn.task_layers()
        self.entries = [e.id for e in lqn.entries]
        self.task_of = {e.id: e.task for e in lqn.entries}
        self.demand = {e: lqn.entry_demand(e) for e in self.entries}
        self.calls = {e: lqn.entry_calls(e) for e in self.entries}
        self.refs = lqn.reference_tasks
        self.servers = lqn.server_tasks
        self.mult = {t.id: t.multiplicity for t in lqn.tasks}

        # entries ordered callers-before-callees
        self.order = sorted(self.entries, key=lambda e: (self.layer[self.task_of[e]], self.entries.index(e)))
        # visits per reference cycle
        self.visits: dict[str, dict[str, float]] = {}
        for ref in self.refs:
            v = {e: 0.0 for e in self.entries}
            for e in lqn.entries_of[ref.id]:
                v[e] = 1.0
            for e in self.order:
                if v[e]:
                    for c, y in self.calls[e].items():
                        v[c] += v[e] * y
            self.visits[ref.id] = v

        pairs = set()
        for e in self.entries:
            for c in self.calls[e]:
                pairs.add((self.task_of[e], self.task_of[c]))
        self.call_pairs = pairs
        # a task can never hold more busy threads than its callers can keep waiting
        self.population = {t.id: t.multiplicity for t in self.refs}
        for t in sorted(self.servers, key=lambda t: self.layer[t.id]):
            callers = sum(self.population[u] for u, v in pairs if v == t.id)
            self.population[t.id] = min(t.multiplicity, callers) if callers else t.multiplicity
        by_layer: dict[int, set] = {}
        for u, t in pairs:
            by_layer.setdefault(self.layer[t], set()).add((u, t))
        self.software = [
            _Submodel(ch, st, self.opts.method)
            for k in sorted(by_layer)
            for ch, st in _components(by_layer[k])
        ]
        self.device = []
        for p in lqn.processors:
            hosted = [t.id for t in self.servers if t.processor == p.id]
            if hosted:
                self.device.append(_Submodel(hosted, [p.id], self.opts.method))
        self._flow_graph = self._thread_graph()
        for sub in self.software:
            sub.scale = self._interlock(sub, device=False)
        for sub in self.device:
            sub.scale = self._interlock(sub, device=True)

    def _thread_graph(self) -> nx.DiGraph:
        """Thread-capacity graph: every task is a node of capacity = its population."""
        g = nx.DiGraph()
        for t in self.lqn.tasks:
            g.add_edge(("in", t.id), ("out", t.id), capacity=float(self.population[t.id]))
        for ref in self.refs:
            g.add_edge("src", ("in", ref.id), capacity=float(ref.multiplicity))
        for u, t in self.call_pairs:
            g.add_edge(("out", u), ("in", t))  # uncapacitated
        return g

    def _interlock(self, sub: _Submodel, device: bool) -> np.ndarray:
        """Per-station factor on the queue an arrival sees.

        Callers that share a thread-limited ancestor cannot all be at the
        station at once; the number that can is a max-flow bound ``B`` over
        thread capacities.  With ``n`` customers nominally visiting, an
        arrival sees at most ``B - 1`` others instead of ``n - 1``.
        """
        scale = np.ones(len(sub.stations))
        for k, station in enumerate(sub.stations):
            if device:
                visiting = list(sub.chains)
                sinks = [("out", t) for t in sub.chains]
            else:
                visiting = [u for u in sub.chains if (u, station) in self.call_pairs]
                sinks = [("in", station)]
            n = sum(self.population[u] for u in visiting)
            if n <= 1:
                continue
            g = self._flow_graph.copy()
            for s in sinks:
                g.add_edge(s, "sink")
            bound = nx.maximum_flow_value(g, "src", "sink")
            scale[k] = min(1.0, max(0.0, (bound - 1.0) / (n - 1.0)))
        return scale

    # -- helpers ---------------------------------------------------------

    def _arrivals(self, X: dict[str, float]) -> dict[str, float]:
        lam = {e: 0.0 for e in self.entries}
        for ref in self.refs:
            x = X[ref.id]
            for e, v in self.visits[ref.id].items():
                if v:
                    lam[e] += x * v
        return lam

    def _holding(self, pres: dict[str, float], wq: dict[tuple[str, str], float]) -> dict[str, float]:
        S: dict[str, float] = {}
        for e in reversed(self.order):
            u = self.task_of[e]
            s = pres[e]
            for c, y in self.calls[e].items():
                s += y * (wq.get((u, self.task_of[c]), 0.0) + S[c])
            S[e] = s
        return S

    def _variance(self, pres, wq, S) -> dict[str, float]:
        """Holding-time variance per entry.

        Processor residence and call waiting are taken as exponential; call
        counts follow randomized rounding of their mean.
        """
        var: dict[str, float] = {}
        for e in reversed(self.order):
            u = self.task_of[e]
            v = pres[e] ** 2
            for c, y in self.calls[e].items():
                w = wq.get((u, self.task_of[c]), 0.0)
                t = w + S[c]
                frac = y - np.floor(y)
                v += y * (var[c] + w * w) + frac * (1.0 - frac) * t * t
            var[e] = v
        return var

    def _flows(self, lam, S):
        """Per (caller task, called task): calls/s and call-weighted service."""
        calls: dict[tuple[str, str], float] = {}
        work: dict[tuple[str, str], float] = {}
        for e in self.entries:
            if not lam[e]:
                continue
            u = self.task_of[e]
            for c, y in self.calls[e].items():
                key = (u, self.task_of[c])
                f = lam[e] * y
                calls[key] = calls.get(key, 0.0) + f
                work[key] = work.get(key, 0.0) + f * S[c]
        return calls, work

    def _second_moments(self, lam, S, var):
        """Per (caller task, called task): call-weighted second moment of service."""
        out: dict[tuple[str, str], float] = {}
        for e in self.entries:
            if not lam[e]:
                continue
            u = self.task_of[e]
            for c, y in self.calls[e].items():
                key = (u, self.task_of[c])
                out[key] = out.get(key, 0.0) + lam[e] * y * (var[c] + S[c] ** 2)
        return out

    def _task_throughput(self, lam, X) -> dict[str, float]:
        out = {t.id: 0.0 for t in self.servers}
        for e in self.entries:
            t = self.task_of[e]
            if t in out:
                out[t] += lam[e]
        for ref in self.refs:
            out[ref.id] = X[ref.id]
        return out

    # -- main loop -------------------------------------------------------

    def solve(self) -> PerformanceResults:
        opts = self.opts
        pres = dict(self.demand)
        wq: dict[tuple[str, str], float] = {}
        S = self._holding(pres, wq)
        X = {}
        for ref in self.refs:
            r = sum(y * S[c] for e in self.lqn.entries_of[ref.id] for c, y in self.calls[e].items())
            X[ref.id] = ref.multiplicity / (ref.think_time + r) if ref.think_time + r > 0 else 0.0
        prev_u: dict[str, float] | None = None
        converged = False
        it = 0
        for it in range(1, opts.max_iters + 1):
            lam = self._arrivals(X)
            S = self._holding(pres, wq)
            var = self._variance(pres, wq, S)
            calls, work = self._flows(lam, S)
            second = self._second_moments(lam, S, var)
            xt = self._task_throughput(lam, X)
            new_wq = dict(wq)
            new_X = dict(X)

            for sub in self.software:
                Cn, Kn = len(sub.chains), len(sub.stations)
                N = np.array([float(self.population[u]) for u in sub.chains])
                D = np.zeros((Cn, Kn))
                V = np.zeros((Cn, Kn))
                G = np.zeros((Cn, Kn))
                Z = np.zeros(Cn)
                for i, u in enumerate(sub.chains):
                    x_u = xt[u]
                    inside = 0.0
                    for k, t in enumerate(sub.stations):
                        f = calls.get((u, t), 0.0)
                        if f and x_u > 0:
                            V[i, k] = f / x_u
                            D[i, k] = work[(u, t)] / x_u
                            mean = work[(u, t)] / f
                            if mean > 0:
                                cv2 = second[(u, t)] / f / mean**2 - 1.0
                                G[i, k] = mean * (cv2 - 1.0) / 2.0
                            inside += D[i, k] + V[i, k] * wq.get((u, t), 0.0)
                    if x_u <= 0:
                        Z[i] = 1e12
                    elif u in self.visits:
                        ref = self.lqn.task_map[u]
                        outside = 0.0
                        for (a, t), f in calls.items():
                            if a == u and t not in sub.stations:
                                outside += (work[(a, t)] + f * wq.get((a, t), 0.0)) / x_u
                        Z[i] = ref.think_time + outside
                    else:
                        Z[i] = max(0.0, N[i] / x_u - inside)
                servers = np.array([float(self.mult[t]) for t in sub.stations])
                sol = sub.state.step(N, Z, D, servers, V, G, sub.scale)
                for i, u in enumerate(sub.chains):
                    for k, t in enumerate(sub.stations):
                        if V[i, k] > 0:
                            new_wq[(u, t)] = max(0.0, sol.residence[i, k] / V[i, k] - D[i, k] / V[i, k])
                    if u in self.visits:
                        new_X[u] = float(sol.throughput[i])

            new_pres = dict(pres)
            for sub in self.device:
                proc = self.lqn.processor_map[sub.stations[0]]
                Cn = len(sub.chains)
                N = np.array([float(self.population[u]) for u in sub.chains])
                D = np.zeros((Cn, 1))
                Z = np.zeros(Cn)
                for i, u in enumerate(sub.chains):
                    x_u = xt[u]
                    if x_u <= 0:
                        Z[i] = 1e12
                        continue
                    d = sum(lam[e] * self.demand[e] for e in self.lqn.entries_of[u]) / x_u
                    r = sum(lam[e] * pres[e] for e in self.lqn.entries_of[u]) / x_u
                    D[i, 0] = d
                    Z[i] = max(0.0, N[i] / x_u - r)
                sol = sub.state.step(N, Z, D, np.array([float(proc.multiplicity)]), scale=sub.scale)
                for i, u in enumerate(sub.chains):
                    g = sol.residence[i, 0] / D[i, 0] if D[i, 0] > 0 else 1.0
                    for e in self.lqn.entries_of[u]:
                        new_pres[e] = self.demand[e] * g

            w = opts.relaxation
            keys = set(wq) | set(new_wq)
            wq = {k: (1 - w) * wq.get(k, 0.0) + w * new_wq.get(k, 0.0) for k in keys}
            pres = {e: (1 - w) * pres[e] + w * new_pres[e] for e in self.entries}
            X = {k: (1 - w) * X[k] + w * new_X[k] for k in X}

            util = self._utilizations(self._arrivals(X), self._holding(pres, wq))
            if prev_u is not None and max(abs(util[k] - prev_u[k]) for k in util) < opts.tolerance:
                converged = True
                break
            prev_u = util
        return self._results(pres, wq, it, converged)

    def _utilizations(self, lam, S) -> dict[str, float]:
        """Per-server utilization of processors and tasks (keys prefixed)."""
        out: dict[str, float] = {}
        for p in self.lqn.processors:
            busy = sum(lam[e] * self.demand[e] for e in self.entries
                       if self.lqn.task_map[self.task_of[e]].processor == p.id)
            out["p:" + p.id] = busy / p.multiplicity
        for t in self.servers:
            out["t:" + t.id] = sum(lam[e] * S[e] for e in self.lqn.entries_of[t.id]) / t.multiplicity
        return out

    def _results(self, pres, wq, iterations: int, converged: bool) -> PerformanceResults:
        S = self._holding(pres, wq)
        X, R = {}, {}
        for ref in self.refs:
            r = 0.0
            for e in self.lqn.entries_of[ref.id]:
                for c, y in self.calls[e].items():
                    r += y * (wq.get((ref.id, self.task_of[c]), 0.0) + S[c])
            R[ref.id] = r
            cyc = ref.think_time + r
            X[ref.id] = ref.multiplicity / cyc if cyc > 0 else 0.0
        lam = self._arrivals(X)
        res = PerformanceResults(iterations=iterations, converged=converged)
        for ref in self.refs:
            key = ref.scenario or ref.id
            res.throughput[key] = X[ref.id]
            res.response_time[key] = R[ref.id]
        for p in self.lqn.processors:
            busy = sum(lam[e] * self.demand[e] for e in self.entries
                       if self.lqn.task_map[self.task_of[e]].processor == p.id)
            res.utilization[p.id] = busy
            res.multiplicity[p.id] = p.multiplicity
        for t in self.servers:
            res.task_utilization[t.id] = sum(lam[e] * S[e] for e in self.lqn.entries_of[t.id])
        return res


def solve(lqn: LqnModel, opts: SolverOptions | None = None) -> PerformanceResults:
    """Solve an LQN; non-convergence is reported through ``converged``."""
    return LayeredSolver(lqn, opts).solve()
