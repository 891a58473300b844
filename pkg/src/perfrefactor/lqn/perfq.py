"""Relative performance change between two solved models."""

from __future__ import annotations

from .model import PerformanceResults

UTILIZATION_LIMIT = 0.8


class EmptyIndexSet(ValueError):
    """The two results share no comparable performance index."""


def utilization_correction(initial: float, final: float, limit: float = UTILIZATION_LIMIT) -> float:
    """Penalty added to a utilization term when either side exceeds ``limit``."""
    if final > limit and initial > limit:
        s = final + initial
        return -2.0 * (final - initial) / s if s else 0.0
    if final > limit:
        return limit - final
    if initial > limit:
        return initial - limit
    return 0.0


def _ratio(initial: float, final: float) -> float:
    s = final + initial
    return (final - initial) / s if s else 0.0


def index_terms(initial: PerformanceResults, variant: PerformanceResults) -> list[tuple[str, float]]:
    """Signed per-index contributions, labelled for reporting.

    Throughputs count positively and response times negatively.  Processor
    utilizations are compared per server and carry the high-utilization
    correction; processors missing from either side are skipped.
    """
    terms: list[tuple[str, float]] = []
    for sid in sorted(initial.throughput):
        if sid in variant.throughput:
            terms.append((f"X:{sid}", _ratio(initial.throughput[sid], variant.throughput[sid])))
    for sid in sorted(initial.response_time):
        if sid in variant.response_time:
            terms.append((f"R:{sid}", -_ratio(initial.response_time[sid], variant.response_time[sid])))
    for pid in sorted(initial.utilization):
        if pid in variant.utilization:
            i = initial.per_server_utilization(pid)
            f = variant.per_server_utilization(pid)
            terms.append((f"U:{pid}", _ratio(i, f) + utilization_correction(i, f)))
    return terms


def perfq(initial: PerformanceResults, variant: PerformanceResults) -> float:
    """Mean signed relative change over all shared indices; positive is better.

    Raises:
        EmptyIndexSet: no index appears in both results.
    """
    terms = index_terms(initial, variant)
    if not terms:
        raise EmptyIndexSet("no performance index is shared by the two results")
    return sum(t for _, t in terms) / len(terms)
