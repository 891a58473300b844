"""Exact multi-class MVA by full population recursion (single-server PS/FCFS stations)."""

from __future__ import annotations

import itertools

import numpy as np


def exact_mva(populations, think_times, demands):
    """Throughput and per-chain response time of a closed product-form network.

    Args:
        populations: customers per chain, shape (C,).
        think_times: delay per cycle per chain, shape (C,).
        demands: per-cycle demand of chain c at station k, shape (C, K).

    Returns:
        (X, R, U): throughput (C,), response time excluding think (C,), and
        station utilization (K,).
    """
    N = tuple(int(n) for n in populations)
    Z = np.asarray(think_times, dtype=float)
    D = np.asarray(demands, dtype=float)
    C, K = D.shape
    # queue lengths indexed by population vector
    Q = {tuple([0] * C): np.zeros(K)}
    X = np.zeros(C)
    R = np.zeros(C)
    for n in sorted(itertools.product(*(range(x + 1) for x in N)), key=sum):
        if sum(n) == 0:
            continue
        Rk = np.zeros((C, K))
        for c in range(C):
            if n[c] == 0:
                continue
            prev = list(n)
            prev[c] -= 1
            Rk[c] = D[c] * (1.0 + Q[tuple(prev)])
        X = np.array([n[c] / (Z[c] + Rk[c].sum()) if n[c] else 0.0 for c in range(C)])
        Q[n] = (X[:, None] * Rk).sum(axis=0)
        R = Rk.sum(axis=1)
    U = (X[:, None] * D).sum(axis=0)
    return X, R, U
