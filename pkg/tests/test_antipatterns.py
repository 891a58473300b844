import numpy as np
import pytest
from hypothesis import given, strategies as st

from perfrefactor.antipatterns import (
    DEFAULT_THRESHOLDS,
    KINDS,
    AntipatternInstance,
    DetectionConfig,
    OutOfBounds,
    count_pas,
    detect,
    fuzzy_probability,
)
from perfrefactor.lqn.model import PerformanceResults
from perfrefactor.lqn.solver import solve
from perfrefactor.lqn.transform import transform
from perfrefactor.model import model_from_dict
from tests.oracles.generators import random_architecture


def test_fuzzy_endpoints():
    assert fuzzy_probability(10.0, 0.0, 10.0) == 1.0
    assert fuzzy_probability(0.0, 0.0, 10.0) == 0.0
    assert fuzzy_probability(7.5, 0.0, 10.0) == 0.75
    assert fuzzy_probability(3.0, 3.0, 3.0) == 0.0
    with pytest.raises(OutOfBounds):
        fuzzy_probability(11.0, 0.0, 10.0)


@given(st.floats(-1e3, 1e3), st.floats(1e-2, 1e3), st.floats(0, 1))
def test_fuzzy_linear(lb, width, t):
    ub = lb + width
    x = lb + t * width
    x = min(max(x, lb), ub)
    p = fuzzy_probability(x, lb, ub)
    assert 0.0 <= p <= 1.0
    assert p == pytest.approx((x - lb) / width, abs=1e-9)


def _inst(p):
    return AntipatternInstance("Blob", ("x",), p)


def test_count_pas_examples():
    assert count_pas([], DetectionConfig(0.8)) == 0
    insts = [_inst(0.6), _inst(0.9)]
    assert count_pas(insts, DetectionConfig(0.80)) == 1
    assert count_pas(insts, DetectionConfig(0.55)) == 2
    assert count_pas(insts + [_inst(1.0)], DetectionConfig(0.55, mode="deterministic")) == 1
    assert count_pas(insts, DetectionConfig(0.55, aggregate="sum")) == pytest.approx(1.5)


def test_config_validation():
    with pytest.raises(ValueError):
        DetectionConfig(0.0)
    with pytest.raises(ValueError):
        DetectionConfig(0.5, mode="crisp")


def _three_component(counts=(8, 2, 4), utils=(0.9, 0.3, 0.5)):
    """A calls B and C; repetitions chosen to give the requested traffic per component."""
    a, b, c = counts
    rb, rc = b, c
    ra = a - rb - rc
    doc = {
        "name": "blob",
        "components": [
            {"id": "A", "failure_prob": 0.0, "operations": ["a"]},
            {"id": "B", "failure_prob": 0.0, "operations": ["b"]},
            {"id": "C", "failure_prob": 0.0, "operations": ["c"]},
        ],
        "nodes": [{"id": f"n{i}", "speed_factor": 1.0, "deployed": [x]} for i, x in enumerate("ABC")],
        "links": [
            {"id": "l01", "endpoints": ["n0", "n1"], "failure_prob": 0.0},
            {"id": "l02", "endpoints": ["n0", "n2"], "failure_prob": 0.0},
        ],
        "scenarios": [{
            "id": "s", "probability": 1.0, "workload": {"population": 1, "think_time_s": 1.0},
            "messages": [
                {"id": "m1", "sender": "$actor", "receiver_op": "a", "exec_time_s": 0.01, "rep": ra, "msg_size_kb": 0},
                {"id": "m2", "sender": "A", "receiver_op": "b", "exec_time_s": 0.01, "rep": rb, "msg_size_kb": 1},
                {"id": "m3", "sender": "A", "receiver_op": "c", "exec_time_s": 0.01, "rep": rc, "msg_size_kb": 1},
            ],
        }],
    }
    res = PerformanceResults(
        throughput={"s": 1.0}, response_time={"s": 0.1},
        utilization={f"n{i}": u for i, u in enumerate(utils)},
        multiplicity={f"n{i}": 1 for i in range(3)},
    )
    return model_from_dict(doc), res


def _by(instances, kind):
    return {i.target: i for i in instances if i.kind == kind}


def test_blob_hand_computed():
    counts, utils = (8, 2, 4), (0.9, 0.3, 0.5)
    model, res = _three_component(counts, utils)
    blobs = _by(detect(model, res), "Blob")
    # recompute each literal and min-combine
    for comp, n, u in zip("ABC", counts, utils):
        p_traffic = (n - min(counts)) / (max(counts) - min(counts))
        p_util = (u - min(utils)) / (max(utils) - min(utils))
        expect = min(p_traffic, p_util)
        got = blobs[(comp,)].probability if (comp,) in blobs else 0.0
        assert got == pytest.approx(expect, abs=1e-12)
    assert blobs[("A",)].probability == 1.0


def test_symmetric_system_no_blob_or_cps():
    model, res = _three_component((4, 4, 4), (0.5, 0.5, 0.5))
    found = detect(model, res)
    assert not _by(found, "Blob")
    assert not _by(found, "ConcurrentProcessingSystem")


def test_explainability(ttbs):
    res = solve(transform(ttbs))
    found = detect(ttbs, res)
    assert found
    for inst in found:
        assert inst.kind in KINDS
        assert 0.0 < inst.probability <= 1.0
        recomputed = min(fuzzy_probability(v["value"], v["lb"], v["ub"]) for v in inst.literal_values.values())
        assert inst.probability == recomputed
        known = {*ttbs.component_map, *ttbs.node_map, *ttbs.link_map, *ttbs.scenario_map}
        assert all(t in known for t in inst.target)


def test_detect_deterministic(ttbs):
    res = solve(transform(ttbs))
    assert [i.to_dict() for i in detect(ttbs, res)] == [i.to_dict() for i in detect(ttbs, res)]


def test_tower_of_babel_needs_formats():
    model, res = _three_component()
    assert not _by(detect(model, res), "TowerOfBabel")


@pytest.mark.parametrize("seed", range(20))
def test_count_monotone_in_threshold(seed):
    model = random_architecture(np.random.default_rng(seed), formats=True)
    found = detect(model, solve(transform(model)))
    counts = [count_pas(found, DetectionConfig(t)) for t in DEFAULT_THRESHOLDS]
    assert counts == sorted(counts, reverse=True)
