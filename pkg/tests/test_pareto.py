import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from perfrefactor.optimizer import (
    Individual,
    ObjectiveVector,
    ParetoFront,
    crowding_distance,
    dominates,
    hypervolume,
    nondominated_filter,
    nondominated_sort,
    reference_front,
)
from perfrefactor.refactoring import RefactoringSequence
from tests.oracles.pareto_bf import brute_force_fronts, brute_force_filter, crowding_reference, hv_inclusion_exclusion


def _ind(*obj):
    return Individual(RefactoringSequence(), ObjectiveVector(*obj))


def test_objective_vector_dominance():
    a = ObjectiveVector(1, 1, 0, 0)
    b = ObjectiveVector(0.5, 0.5, 1, 1)
    assert a.dominates(b) and not b.dominates(a)
    assert len(nondominated_sort([a, b])) == 2


def test_identical_population_single_front():
    pop = [ObjectiveVector(0.1, 0.9, 2, 3.0)] * 5
    assert nondominated_sort(pop) == [[0, 1, 2, 3, 4]]


def test_objective_vector_rejects_bad_values():
    with pytest.raises(ValueError):
        ObjectiveVector(math.nan, 0.5, 0, 0)
    with pytest.raises(ValueError):
        ObjectiveVector(0.0, 1.5, 0, 0)


@pytest.mark.parametrize("seed", range(20))
def test_sort_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    # integer grid gives plenty of ties and weak dominance
    pts = rng.integers(0, 5, size=(30, 4)).astype(float)
    fronts = nondominated_sort(pts)
    assert [set(f) for f in fronts] == brute_force_fronts([tuple(p) for p in pts])


vec4 = st.tuples(*[st.integers(0, 3)] * 4)


@given(st.lists(vec4, min_size=1, max_size=12))
def test_sort_partition(points):
    fronts = nondominated_sort(points)
    flat = sorted(i for f in fronts for i in f)
    assert flat == list(range(len(points)))
    for k, f in enumerate(fronts):
        for i in f:
            assert not any(dominates(points[j], points[i]) for j in f)
            if k:
                assert any(dominates(points[j], points[i]) for j in fronts[k - 1])


@given(vec4, vec4, vec4)
def test_dominance_strict_partial_order(a, b, c):
    assert not dominates(a, a)
    if dominates(a, b):
        assert not dominates(b, a)
    if dominates(a, b) and dominates(b, c):
        assert dominates(a, c)


def test_crowding_small_fronts():
    assert list(crowding_distance([(0, 0, 0, 0)])) == [math.inf]
    assert list(crowding_distance([(0, 1, 0, 0), (1, 0, 0, 0)])) == [math.inf, math.inf]


def test_crowding_collinear():
    d = crowding_distance([(0.0, 0, 0, 0), (1.0, 0, 0, 0), (2.0, 0, 0, 0)])
    assert d[0] == math.inf and d[2] == math.inf
    assert d[1] == pytest.approx(1.0)


@pytest.mark.parametrize("seed", range(10))
def test_crowding_matches_reference(seed):
    pts = np.random.default_rng(seed).random((10, 4))
    got = crowding_distance(pts)
    want = crowding_reference([tuple(p) for p in pts])
    assert np.allclose(got, want)
    for k in range(4):
        assert got[np.argmin(pts[:, k])] == math.inf
        assert got[np.argmax(pts[:, k])] == math.inf


@pytest.mark.parametrize("seed", range(10))
def test_hypervolume_matches_inclusion_exclusion(seed):
    rng = np.random.default_rng(seed)
    pts = rng.random((int(rng.integers(1, 7)), 4))
    ref = np.full(4, 1.1)
    assert hypervolume(pts, ref) == pytest.approx(hv_inclusion_exclusion(pts, ref), rel=1e-9, abs=1e-12)


def test_hypervolume_box():
    assert hypervolume([(0.0, 0.0)], (2.0, 3.0)) == pytest.approx(6.0)
    assert hypervolume([(3.0, 0.0)], (2.0, 3.0)) == 0.0
    assert hypervolume([], (1.0,)) == 0.0


def test_reference_front_single_input_dedup():
    f = ParetoFront([_ind(0.2, 0.9, 1, 2.0), _ind(0.2, 0.9, 1, 2.0), _ind(0.3, 0.8, 1, 2.0)])
    out = reference_front([f])
    assert [s.objectives.as_tuple() for s in out.solutions] == [(0.2, 0.9, 1, 2.0), (0.3, 0.8, 1, 2.0)]


def test_reference_front_dominating_input_wins():
    good = ParetoFront([_ind(0.5, 0.9, 0, 1.0), _ind(0.6, 0.8, 0, 1.0)])
    bad = ParetoFront([_ind(0.4, 0.8, 1, 2.0), _ind(0.1, 0.7, 2, 3.0)])
    out = reference_front([bad, good])
    assert sorted(s.objectives.as_tuple() for s in out.solutions) == sorted(
        s.objectives.as_tuple() for s in good.solutions
    )


@pytest.mark.parametrize("seed", range(5))
def test_reference_front_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    fronts = []
    for _ in range(5):
        rows = [
            (float(rng.integers(-3, 4)) / 4, float(rng.integers(0, 5)) / 4, int(rng.integers(0, 3)), float(rng.integers(0, 4)))
            for _ in range(8)
        ]
        fronts.append(ParetoFront([_ind(*r) for r in rows]))
    out = reference_front(fronts)
    got = sorted(s.objectives.minimization() for s in out.solutions)
    union = [s.objectives.minimization() for f in fronts for s in f.solutions]
    assert got == brute_force_filter(union)


def test_filter_on_raw_rows():
    assert nondominated_filter([(1, 1), (0, 2), (1, 1), (2, 2)]) == [0, 1]
