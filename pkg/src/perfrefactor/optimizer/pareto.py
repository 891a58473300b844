"""Dominance sorting, crowding distance, reference fronts and hypervolume."""

from __future__ import annotations

from typing import Sequence

import numpy as np


def _as_matrix(points) -> np.ndarray:
    """Minimization image of individuals, objective vectors or raw rows."""
    rows = []
    for p in points:
        if hasattr(p, "objectives"):
            p = p.objectives
        if hasattr(p, "minimization"):
            p = p.minimization()
        rows.append(np.asarray(p, dtype=float))
    if not rows:
        return np.zeros((0, 0))
    return np.vstack(rows)


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    """Pareto dominance for minimization."""
    a = np.asarray(a)
    b = np.asarray(b)
    return bool(np.all(a <= b) and np.any(a < b))


def nondominated_sort(population) -> list[list[int]]:
    """Fast non-dominated sort.

    Args:
        population: individuals, objective vectors, or rows already in
            minimization form.

    Returns:
        Fronts as lists of indices into ``population``, best first.
    """
    F = _as_matrix(population)
    n = len(F)
    if n == 0:
        return []
    le = np.all(F[:, None, :] <= F[None, :, :], axis=2)
    lt = np.any(F[:, None, :] < F[None, :, :], axis=2)
    dom = le & lt  # dom[i, j]: i dominates j
    count = dom.sum(axis=0)
    fronts: list[list[int]] = []
    current = [i for i in range(n) if count[i] == 0]
    while current:
        fronts.append(current)
        nxt = []
        for i in current:
            for j in np.flatnonzero(dom[i]):
                count[j] -= 1
                if count[j] == 0:
                    nxt.append(int(j))
        current = sorted(nxt)
    return fronts


def crowding_distance(front) -> np.ndarray:
    """Crowding distance of each member of one front.

    Objectives are normalized by the front's own range.  The two extreme
    members of every objective with a nonzero range get ``inf``; an
    objective whose values are all equal contributes nothing.
    """
    F = _as_matrix(front)
    n = len(F)
    dist = np.zeros(n)
    if n <= 2:
        return np.full(n, np.inf)
    for k in range(F.shape[1]):
        col = F[:, k]
        span = col.max() - col.min()
        if span <= 0:
            continue
        order = np.argsort(col, kind="stable")
        dist[order[0]] = dist[order[-1]] = np.inf
        gaps = (col[order[2:]] - col[order[:-2]]) / span
        dist[order[1:-1]] += gaps
    return dist


def nondominated_filter(population) -> list[int]:
    """Indices of the first front, with identical objective vectors collapsed."""
    F = _as_matrix(population)
    if len(F) == 0:
        return []
    first = nondominated_sort(F)[0]
    seen: set[tuple] = set()
    keep = []
    for i in sorted(first):
        key = tuple(F[i])
        if key not in seen:
            seen.add(key)
            keep.append(i)
    return keep


def hypervolume(points, reference: Sequence[float]) -> float:
    """Exact hypervolume dominated by ``points`` inside ``reference`` (minimization).

    Recursive slicing over the last objective; fine for the front sizes an
    experiment produces.
    """
    F = _as_matrix(points)
    ref = np.asarray(reference, dtype=float)
    if len(F) == 0:
        return 0.0
    F = F[np.all(F < ref, axis=1)]
    return _hv(F, ref)


def _hv(F: np.ndarray, ref: np.ndarray) -> float:
    if len(F) == 0:
        return 0.0
    if F.shape[1] == 1:
        return float(ref[0] - F[:, 0].min())
    F = F[nondominated_sort(F)[0]]
    F = F[np.argsort(F[:, -1], kind="stable")]
    vol = 0.0
    for i in range(len(F)):
        top = F[i + 1, -1] if i + 1 < len(F) else ref[-1]
        width = top - F[i, -1]
        if width > 0:
            vol += width * _hv(F[: i + 1, :-1], ref[:-1])
    return float(vol)
