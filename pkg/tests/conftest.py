"""Shared fixtures plus the acceptance-summary terminal hook."""

import numpy as np
import pytest

from netquant.graph import Graph, build_graph

# one line per acceptance check, printed after the run in this order
CRITERIA = [
    ("test_c1", "criterion 1: EM quantifier recovers shifted priors from Bayes posteriors (+/-0.01, <5s)"),
    ("test_c2", "criterion 2: adjusted-count inversion, mean |err| <= 0.02 over 200 APP samples (<10s)"),
    ("test_c3", "criterion 3: histogram mixture search recovers blend weights within 0.02 (<5s)"),
    ("test_c4", "criterion 4: reservoir radius accuracy, drift decay, bitwise permutation equivariance"),
    ("test_c5", "criterion 5: citation-graph end-to-end mean MAE <= 0.05"),
    ("test_c6", "criterion 6: EM pipeline beats raw counting under label shift, 5-seed average"),
    ("test_c7", "criterion 7: neighborhood labelers exact on homophilous cliques (MAE = 0)"),
    ("test_c8", "criterion 8: quantifier oracle suite, exact or within 1e-12"),
]

_acceptance_outcomes = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.rsplit("::", 1)[-1]
    key = next((k for k, _ in CRITERIA if name.startswith(k)), None)
    if key is None:
        return
    if report.when == "setup" and report.skipped:
        _acceptance_outcomes.setdefault(key, "SKIP")
    elif report.when == "call":
        outcome = "PASS" if report.passed else "FAIL"
        # criteria with several parts stay FAIL once any part fails
        if _acceptance_outcomes.get(key) != "FAIL":
            _acceptance_outcomes[key] = outcome
    elif report.failed:
        _acceptance_outcomes[key] = "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for key, label in CRITERIA:
        outcome = _acceptance_outcomes.get(key)
        if outcome is None:
            continue
        terminalreporter.write_line("%s  %s" % (outcome, label))


@pytest.fixture
def path3():
    # 0 - 1 - 2
    return build_graph(np.array([[0, 1], [1, 2]]), 3)


@pytest.fixture
def k2():
    return build_graph(np.array([[0, 1]]), 2)


@pytest.fixture
def triangle():
    return build_graph(np.array([[0, 1], [1, 2], [0, 2]]), 3)


def random_csr(node_count, edge_prob, rng):
    """Erdos-Renyi helper shared by several test modules."""
    rows, cols = np.triu_indices(node_count, k=1)
    keep = rng.random(rows.size) < edge_prob
    edges = np.stack([rows[keep], cols[keep]], axis=1)
    if edges.size == 0:
        return Graph(
            node_count,
            np.zeros(node_count + 1, dtype=np.int64),
            np.empty(0, dtype=np.int64),
        )
    return build_graph(edges, node_count)
