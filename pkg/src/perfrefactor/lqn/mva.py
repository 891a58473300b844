"""Approximate MVA for closed multi-chain queueing networks.

Each chain ``c`` has a population ``N[c]`` and a think time ``Z[c]``; it
places a total demand ``D[c, k]`` per cycle on station ``k``.  Stations are
FCFS/PS queues with ``servers[k]`` identical servers, or pure delays when
``servers[k]`` is infinite.  Multi-server queues use Seidmann's split into
a single queue of demand ``D/m`` plus a delay of ``D(m-1)/m``.

``schweitzer`` estimates the queue seen at arrival as ``(N-1)/N`` of the
current queue.  ``linearizer`` refines that estimate with Chandy-Neuse
fractional-deviation corrections computed from the ``N - e_c`` networks;
it is markedly more accurate near the knee of the throughput curve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CORE_TOL = 1e-10
CORE_MAX_ITERS = 5000
LINEARIZER_ROUNDS = 3
# warm-started steps inside an outer fixed point need less precision
STEP_TOL = 1e-7


@dataclass
class MvaSolution:
    throughput: np.ndarray  # (C,)
    residence: np.ndarray  # (C, K) time per cycle spent at each station
    queue: np.ndarray  # (C, K) mean number of chain-c customers at station k
    iterations: int


def _split_demands(N, D, servers):
    D = np.asarray(D, dtype=float)
    servers = np.asarray(servers, dtype=float)
    visiting = (D > 0).astype(float)
    load = N @ visiting  # customers that can ever reach each station
    delay = np.isinf(servers) | (load <= servers)
    m = np.where(delay, 1.0, servers)
    Dq = np.where(delay, 0.0, D / m)
    Dd = np.where(delay, D, D * (m - 1.0) / m)
    return Dq, Dd


def _queue_correction(N, D, servers, G):
    """Scale per-visit residual corrections to the queueing part of each station."""
    if G is None:
        return None
    servers = np.asarray(servers, dtype=float)
    load = N @ (np.asarray(D) > 0).astype(float)
    delay = np.isinf(servers) | (load <= servers)
    return np.where(delay[None, :], 0.0, np.asarray(G, dtype=float) / np.where(delay, 1.0, servers)[None, :])


def _core(n, Z, Dq, Dd, F, Q0, V=None, G=None, scale=None, tol=CORE_TOL):
    """Schweitzer fixed point at population ``n`` with deviations ``F``.

    ``F[c, j, k]`` is the fractional deviation of chain ``j`` at station
    ``k`` when one chain-``c`` customer is removed.  When ``G`` is given,
    ``G[j, k]`` is the per-visit residual-life correction ``S (cv2 - 1) / 2``
    of chain ``j`` at station ``k`` and ``V`` holds visit counts; an arriving
    customer then waits that much extra per busy server it finds, damped by
    the station's idle fraction so the correction fades as it saturates.
    ``scale[k]`` shrinks the queue seen at station ``k`` (interlocking).
    """
    C, K = Dq.shape
    if C == 1 and n[0] <= 1:
        # a lone customer never queues
        R = Dq + Dd
        X = n / max(float(Z[0] + R.sum()), 1e-300) if n[0] > 0 else np.zeros(1)
        return X, R, X[:, None] * Dq, 1
    active = n > 0
    Q = Q0.copy()
    Q[~active] = 0.0
    safe_n = np.where(active, n, 1.0)[:, None]
    # (n_j - delta_jc) for every (c, j), contracted with F once
    corr = np.einsum("cj,cjk->ck", n[None, :] - np.eye(C), F)
    if scale is None:
        scale = 1.0
    R = Dq + Dd
    X = np.where(active, n / np.maximum(Z + R.sum(axis=1), 1e-300), 0.0)
    limit = tol * max(1.0, float(n.sum()))
    for it in range(1, CORE_MAX_ITERS + 1):
        q = Q / safe_n
        seen = np.maximum(n @ q - q + corr, 0.0) * scale
        Rq = Dq * (1.0 + seen)
        if G is not None:
            U = X[:, None] * Dq  # previous iterate
            idle = np.clip(1.0 - U.sum(axis=0), 0.0, 1.0)
            extra = U * G * idle
            Rq = np.maximum(Rq + V * (extra.sum(axis=0) - extra / safe_n), Dq)
        R = Rq + Dd
        X = np.where(active, n / np.maximum(Z + R.sum(axis=1), 1e-300), 0.0)
        Qn = X[:, None] * Rq
        delta = np.abs(Qn - Q).max()
        Q = Qn
        if delta < limit:
            break
    return X, R, Q, it


def solve_closed(N, Z, D, servers, method: str = "linearizer", warm: np.ndarray | None = None) -> MvaSolution:
    """Solve a closed network approximately.

    Args:
        N: chain populations, shape (C,).
        Z: chain think times, shape (C,).
        D: per-cycle demands, shape (C, K).
        servers: servers per station, shape (K,); ``np.inf`` for delays.
        method: ``"schweitzer"`` or ``"linearizer"``.
        warm: optional starting queue lengths, shape (C, K).
    """
    N = np.asarray(N, dtype=float)
    Z = np.asarray(Z, dtype=float)
    Dq, Dd = _split_demands(N, D, servers)
    C, K = Dq.shape
    F = np.zeros((C, C, K))
    if warm is None:
        tot = Dq.sum(axis=1, keepdims=True)
        Q0 = np.where(tot > 0, N[:, None] * Dq / np.where(tot > 0, tot, 1.0), 0.0)
    else:
        Q0 = np.asarray(warm, dtype=float)

    X, R, Q, iters = _core(N, Z, Dq, Dd, F, Q0)
    if method == "schweitzer":
        return MvaSolution(X, R, Q, iters)
    if method != "linearizer":
        raise ValueError(f"unknown MVA method {method!r}")

    for _ in range(LINEARIZER_ROUNDS):
        reduced_Q = []
        for c in range(C):
            if N[c] < 1:
                reduced_Q.append(np.zeros((C, K)))
                continue
            nc = N.copy()
            nc[c] -= 1
            _, _, Qc, k = _core(nc, Z, Dq, Dd, F, Q * (nc / np.where(N > 0, N, 1.0))[:, None])
            iters += k
            reduced_Q.append(Qc)
        F = np.zeros((C, C, K))
        safe_N = np.where(N > 0, N, 1.0)
        for c in range(C):
            nc = N.copy()
            nc[c] -= 1
            ok = nc > 0
            F[c, ok, :] = reduced_Q[c][ok, :] / nc[ok, None] - Q[ok, :] / safe_N[ok, None]
        X, R, Q, k = _core(N, Z, Dq, Dd, F, Q)
        iters += k
    return MvaSolution(X, R, Q, iters)


class LinearizerState:
    """Warm-startable Linearizer for a submodel whose structure is fixed.

    The layered solver calls :meth:`step` once per outer iteration with
    updated demands and think times; queue estimates and fractional
    deviations carry over, so each step costs a few core iterations.
    """

    def __init__(self, n_chains: int, n_stations: int, method: str = "linearizer"):
        self.method = method
        self.Q: np.ndarray | None = None
        self.reduced: list[np.ndarray] | None = None
        self.F = np.zeros((n_chains, n_chains, n_stations))

    def step(self, N, Z, D, servers, V=None, G=None, scale=None) -> MvaSolution:
        N = np.asarray(N, dtype=float)
        Z = np.asarray(Z, dtype=float)
        Dq, Dd = _split_demands(N, D, servers)
        G = _queue_correction(N, D, servers, G)
        C, K = Dq.shape
        if self.Q is None:
            tot = Dq.sum(axis=1, keepdims=True)
            self.Q = np.where(tot > 0, N[:, None] * Dq / np.where(tot > 0, tot, 1.0), 0.0)
        iters = 0
        if self.method == "linearizer":
            if self.reduced is None:
                self.reduced = [self.Q * ((N - np.eye(C)[c]) / np.where(N > 0, N, 1.0))[:, None] for c in range(C)]
            safe_N = np.where(N > 0, N, 1.0)
            # every reduced network sees the same deviations; updating F row
            # by row inside the sweep makes the warm-started steps oscillate
            F = np.zeros_like(self.F)
            for c in range(C):
                nc = N.copy()
                nc[c] -= 1
                _, _, Qc, k = _core(nc, Z, Dq, Dd, self.F, self.reduced[c], V, G, scale, STEP_TOL)
                iters += k
                self.reduced[c] = Qc
                ok = nc > 0
                F[c, ok, :] = Qc[ok, :] / nc[ok, None] - self.Q[ok, :] / safe_N[ok, None]
            self.F = F
        X, R, Q, k = _core(N, Z, Dq, Dd, self.F, self.Q, V, G, scale, STEP_TOL)
        self.Q = Q
        return MvaSolution(X, R, Q, iters + k)
