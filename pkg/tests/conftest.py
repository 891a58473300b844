import copy

import pytest

from perfrefactor.model import bundled_model_path, load_model, model_from_dict


def minimal_doc(exec_time=0.1, population=1, think=1.0):
    return {
        "name": "minimal",
        "components": [{"id": "C", "failure_prob": 0.01, "operations": ["op"]}],
        "nodes": [{"id": "n1", "speed_factor": 1.0, "deployed": ["C"]}],
        "links": [],
        "scenarios": [{
            "id": "s",
            "probability": 1.0,
            "workload": {"population": population, "think_time_s": think},
            "messages": [{"id": "m1", "sender": "$actor", "receiver_op": "op",
                          "exec_time_s": exec_time, "rep": 1, "msg_size_kb": 0.0}],
        }],
    }


def chain_doc():
    """Client -> A -> B -> C with one component per node, nodes in a line n1-n2-n3."""
    return {
        "name": "chain",
        "components": [
            {"id": "A", "failure_prob": 0.01, "operations": ["a"]},
            {"id": "B", "failure_prob": 0.02, "operations": ["b", "b2"]},
            {"id": "C", "failure_prob": 0.0, "operations": ["c"]},
        ],
        "nodes": [
            {"id": "n1", "speed_factor": 1.0, "deployed": ["A"]},
            {"id": "n2", "speed_factor": 1.0, "deployed": ["B"]},
            {"id": "n3", "speed_factor": 1.0, "deployed": ["C"]},
        ],
        "links": [
            {"id": "l12", "endpoints": ["n1", "n2"], "failure_prob": 0.001},
            {"id": "l23", "endpoints": ["n2", "n3"], "failure_prob": 0.002},
        ],
        "scenarios": [{
            "id": "s",
            "probability": 1.0,
            "workload": {"population": 3, "think_time_s": 1.0},
            "messages": [
                {"id": "m1", "sender": "$actor", "receiver_op": "a", "exec_time_s": 0.01, "rep": 1, "msg_size_kb": 0},
                {"id": "m2", "sender": "A", "receiver_op": "b", "exec_time_s": 0.05, "rep": 2, "msg_size_kb": 1.5},
                {"id": "m3", "sender": "B", "receiver_op": "c", "exec_time_s": 0.02, "rep": 1, "msg_size_kb": 2.0},
            ],
        }],
    }


@pytest.fixture(scope="session")
def ttbs():
    return load_model(bundled_model_path())


@pytest.fixture
def minimal():
    return model_from_dict(minimal_doc())


@pytest.fixture
def chain():
    return model_from_dict(chain_doc())


@pytest.fixture
def doc_copy():
    return lambda d: copy.deepcopy(d)


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
