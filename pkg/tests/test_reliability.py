import copy
import itertools
from fractions import Fraction

import numpy as np
import pytest

from perfrefactor.model import MissingLink, model_from_dict
from perfrefactor.reliability import evaluate_reliability, inv_counts, msg_sizes
from tests.conftest import chain_doc, minimal_doc
from tests.oracles.generators import random_architecture_doc
from tests.oracles.reliability_mc import mc_reliability


def _two_msg_doc(rep_a=3, rep_b=1):
    doc = chain_doc()
    s = doc["scenarios"][0]
    s["messages"] = [
        {"id": "m1", "sender": "$actor", "receiver_op": "a", "exec_time_s": 0.01, "rep": rep_a, "msg_size_kb": 0},
        {"id": "m2", "sender": "$actor", "receiver_op": "b", "exec_time_s": 0.01, "rep": rep_b, "msg_size_kb": 0},
    ]
    return doc


def test_inv_counts_single():
    m = model_from_dict(minimal_doc())
    assert inv_counts(m, "s") == {"C": 1}


def test_inv_counts_repetitions():
    m = model_from_dict(_two_msg_doc())
    counts = inv_counts(m, "s")
    assert counts["A"] == 3 and counts["B"] == 1
    assert counts.get("C", 0) == 0


def test_msg_sizes_colocated_zero():
    doc = chain_doc()
    for n in doc["nodes"]:
        n["deployed"] = []
    doc["nodes"][0]["deployed"] = ["A", "B", "C"]
    m = model_from_dict(doc)
    assert all(v == 0.0 for v in msg_sizes(m, "s").values())


def test_msg_sizes_size_times_rep():
    m = model_from_dict(chain_doc())
    sizes = msg_sizes(m, "s")
    assert sizes["l12"] == pytest.approx(1.5 * 2)
    assert sizes["l23"] == pytest.approx(2.0)


def test_msg_sizes_per_scenario():
    doc = chain_doc()
    s2 = copy.deepcopy(doc["scenarios"][0])
    s2["id"] = "s2"
    for msg in s2["messages"]:
        msg["id"] += "x"
    s2["messages"][1]["msg_size_kb"] = 4.0
    doc["scenarios"][0]["probability"] = 0.5
    s2["probability"] = 0.5
    doc["scenarios"].append(s2)
    rep = evaluate_reliability(model_from_dict(doc))
    i = rep.links.index("l12")
    assert list(rep.msg_sizes[i]) == [3.0, 8.0]


def test_perfect_components_and_links():
    doc = chain_doc()
    for c in doc["components"]:
        c["failure_prob"] = 0.0
    for lk in doc["links"]:
        lk["failure_prob"] = 0.0
    rep = evaluate_reliability(model_from_dict(doc))
    assert rep.reliability == 1.0 and rep.theta_s == 0.0


def test_single_component_invoked_twice():
    doc = minimal_doc()
    doc["components"][0]["failure_prob"] = 0.1
    doc["scenarios"][0]["messages"][0]["rep"] = 2
    rep = evaluate_reliability(model_from_dict(doc))
    assert rep.theta_s == pytest.approx(0.19, abs=1e-12)
    mc = mc_reliability(doc, 10**6, np.random.default_rng(1))
    assert rep.reliability == pytest.approx(mc, abs=3e-3)


def test_report_invariants(ttbs):
    rep = evaluate_reliability(ttbs)
    assert 0.0 <= rep.theta_s <= 1.0
    assert rep.reliability + rep.theta_s == pytest.approx(1.0, abs=1e-15)
    assert rep.inv_counts.shape == (len(rep.components), len(rep.scenarios))
    assert rep.msg_sizes.shape == (len(rep.links), len(rep.scenarios))


def test_bundled_value(ttbs):
    assert evaluate_reliability(ttbs).reliability == pytest.approx(0.657966, abs=1e-6)


def test_missing_link_propagates():
    doc = chain_doc()
    doc["links"] = doc["links"][:1]
    with pytest.raises(MissingLink):
        evaluate_reliability(model_from_dict(doc))


@pytest.mark.parametrize("seed", range(10))
def test_monotone_in_failure_probabilities(seed):
    rng = np.random.default_rng(seed)
    doc = random_architecture_doc(rng)
    base = evaluate_reliability(model_from_dict(doc)).reliability
    worse = copy.deepcopy(doc)
    c = worse["components"][int(rng.integers(len(worse["components"])))]
    c["failure_prob"] = min(1.0, c["failure_prob"] + 0.05)
    assert evaluate_reliability(model_from_dict(worse)).reliability <= base + 1e-15
    if doc["links"]:
        worse = copy.deepcopy(doc)
        worse["links"][0]["failure_prob"] += 0.05
        assert evaluate_reliability(model_from_dict(worse)).reliability <= base + 1e-15


@pytest.mark.parametrize("seed", range(10))
def test_monotone_in_counts_and_sizes(seed):
    rng = np.random.default_rng(50 + seed)
    doc = random_architecture_doc(rng)
    base = evaluate_reliability(model_from_dict(doc)).reliability
    worse = copy.deepcopy(doc)
    msg = worse["scenarios"][0]["messages"][-1]
    msg["rep"] += 1
    msg["msg_size_kb"] += 1.0
    assert evaluate_reliability(model_from_dict(worse)).reliability <= base + 1e-15


def test_exhaustive_enumeration_rational():
    thetas = [Fraction(1, 10), Fraction(1, 5), Fraction(1, 4)]
    doc = chain_doc()
    doc["links"] = []
    for n in doc["nodes"]:
        n["deployed"] = []
    doc["nodes"][0]["deployed"] = ["A", "B", "C"]
    for c, t in zip(doc["components"], thetas):
        c["failure_prob"] = float(t)
    m = model_from_dict(doc)
    counts = inv_counts(m, "s")
    # enumerate every success/failure outcome of every single invocation
    invocations = [t for c, t in zip("ABC", thetas) for _ in range(counts[c])]
    ok = Fraction(0)
    for outcome in itertools.product((True, False), repeat=len(invocations)):
        if all(outcome):
            p = Fraction(1)
            for t in invocations:
                p *= 1 - t
            ok += p
    assert evaluate_reliability(m).reliability == pytest.approx(float(ok), abs=1e-15)


def test_linear_in_scenario_mix():
    doc = _two_msg_doc()
    s2 = copy.deepcopy(doc["scenarios"][0])
    s2["id"] = "s2"
    s2["messages"] = [dict(s2["messages"][0], id="x1", receiver_op="c")]
    doc["scenarios"].append(s2)
    vals = []
    for p in (0.0, 0.3, 1.0):
        doc["scenarios"][0]["probability"] = p
        doc["scenarios"][1]["probability"] = 1.0 - p
        vals.append(evaluate_reliability(model_from_dict(doc)).reliability)
    assert vals[1] == pytest.approx(0.3 * vals[2] + 0.7 * vals[0], abs=1e-12)
