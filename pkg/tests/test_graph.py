import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netquant.graph import (
    Graph,
    GraphError,
    LabelSet,
    PowerIterationError,
    UNLABELED,
    adjusted_homophily,
    build_graph,
    check_features,
    spectral_radius,
)

from conftest import random_csr


def test_single_edge():
    g = build_graph(np.array([[0, 1]]), 3)
    assert g.node_count == 3
    assert g.edge_count == 1
    assert list(g.degrees()) == [1, 1, 0]
    assert g.has_edge(0, 1) and g.has_edge(1, 0)
    assert not g.has_edge(0, 2)
    assert list(g.neighbors(0)) == [1]
    assert list(g.neighbors(2)) == []


def test_duplicate_edges_collapse():
    g = build_graph(np.array([[0, 1], [1, 0], [0, 1]]), 2)
    assert g.edge_count == 1
    assert list(g.degrees()) == [1, 1]


def test_self_loop_counted_once():
    g = build_graph(np.array([[0, 0], [0, 1]]), 2)
    assert g.edge_count == 2
    assert g.has_edge(0, 0)


def test_asymmetric_input_rejected_without_symmetrize():
    indptr = np.array([0, 1, 1], dtype=np.int64)
    indices = np.array([1], dtype=np.int64)
    with pytest.raises(GraphError, match="symmetric"):
        Graph(2, indptr, indices)


def test_explicit_symmetric_input_accepted():
    indptr = np.array([0, 1, 2], dtype=np.int64)
    indices = np.array([1, 0], dtype=np.int64)
    g = Graph(2, indptr, indices)
    assert g.edge_count == 1


def test_out_of_range_edge_rejected():
    with pytest.raises(GraphError):
        build_graph(np.array([[0, 5]]), 3)
    with pytest.raises(GraphError):
        build_graph(np.array([[-1, 0]]), 3)


def test_empty_node_count_rejected():
    with pytest.raises(GraphError):
        build_graph(np.empty((0, 2), dtype=np.int64), 0)


def test_arrays_read_only(path3):
    with pytest.raises(ValueError):
        path3.indices[0] = 99


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_build_graph_properties(data):
    n = data.draw(st.integers(min_value=1, max_value=12))
    edges = data.draw(
        st.lists(
            st.tuples(
                st.integers(min_value=0, max_value=n - 1),
                st.integers(min_value=0, max_value=n - 1),
            ),
            max_size=30,
        )
    )
    if edges:
        g = build_graph(np.array(edges, dtype=np.int64), n)
    else:
        g = build_graph(np.empty((0, 2), dtype=np.int64), n)
    assert int(g.degrees().sum()) == g.indices.size
    for v in range(n):
        row = g.neighbors(v)
        assert np.all(np.diff(row) > 0)  # sorted, no duplicates
        for u in row:
            assert g.has_edge(int(u), v)
    plain = {tuple(sorted(e)) for e in edges if e[0] != e[1]}
    loop_nodes = {a for a, b in edges if a == b}
    assert g.edge_count == len(plain) + len(loop_nodes)


# ---------------------------------------------------------------- spectra


def test_radius_edgeless():
    g = build_graph(np.empty((0, 2), dtype=np.int64), 4)
    assert spectral_radius(g) == 0.0


def test_radius_known_graphs(k2, path3, triangle):
    assert spectral_radius(k2) == pytest.approx(1.0, rel=1e-8)
    assert spectral_radius(path3) == pytest.approx(np.sqrt(2.0), rel=1e-8)
    assert spectral_radius(triangle) == pytest.approx(2.0, rel=1e-8)


def test_radius_star():
    # K_{1,4} has radius sqrt(4) = 2
    g = build_graph(np.array([[0, i] for i in range(1, 5)]), 5)
    assert spectral_radius(g) == pytest.approx(2.0, rel=1e-8)


def test_radius_ignores_isolated_component(triangle):
    g = build_graph(np.array([[0, 1], [1, 2], [0, 2]]), 6)
    assert spectral_radius(g) == pytest.approx(2.0, rel=1e-8)


def test_radius_matches_dense_eigensolver():
    rng = np.random.default_rng(42)
    for trial in range(25):
        n = int(rng.integers(2, 30))
        g = random_csr(n, 0.3, rng)
        dense = np.zeros((n, n))
        rows = np.repeat(np.arange(n), g.degrees())
        dense[rows, g.indices] = 1.0
        want = float(np.max(np.abs(np.linalg.eigvalsh(dense))))
        if want == 0.0:
            assert spectral_radius(g) == 0.0
        else:
            assert spectral_radius(g) == pytest.approx(want, rel=1e-8)


def test_radius_bounded_by_max_degree():
    rng = np.random.default_rng(3)
    g = random_csr(40, 0.2, rng)
    assert spectral_radius(g) <= float(g.degrees().max()) + 1e-9


def test_radius_nonconvergence_carries_state(path3):
    with pytest.raises(PowerIterationError) as info:
        spectral_radius(path3, tolerance=0.0, max_iterations=3)
    err = info.value
    assert err.iterations == 3
    assert err.estimate > 0.0
    assert err.iterate.shape == (3,)


# ---------------------------------------------------------- homophily


def test_adjusted_homophily_hand_case(path3):
    labels = LabelSet(np.array([1, 1, 0], dtype=np.int8))
    # agreement 1/2, positive share 2/3, collision 5/9
    assert adjusted_homophily(path3, labels) == pytest.approx(-0.125, abs=1e-12)


def test_adjusted_homophily_pure_cliques():
    edges = [[0, 1], [1, 2], [0, 2], [3, 4], [4, 5], [3, 5]]
    g = build_graph(np.array(edges), 6)
    labels = LabelSet(np.array([1, 1, 1, 0, 0, 0], dtype=np.int8))
    assert adjusted_homophily(g, labels) == pytest.approx(1.0)


def test_adjusted_homophily_bipartite_heterophily():
    edges = [[0, 2], [0, 3], [1, 2], [1, 3]]
    g = build_graph(np.array(edges), 4)
    labels = LabelSet(np.array([1, 1, 0, 0], dtype=np.int8))
    assert adjusted_homophily(g, labels) == pytest.approx(-1.0)


def test_adjusted_homophily_skips_unlabeled_edges():
    g = build_graph(np.array([[0, 1], [2, 3]]), 4)
    labels = LabelSet(np.array([1, 0, -1, -1], dtype=np.int8))
    # only edge (0,1) counts: agreement 0, shares 1/2 each
    assert adjusted_homophily(g, labels) == pytest.approx(-1.0)


def test_adjusted_homophily_errors(path3):
    with pytest.raises(GraphError):
        adjusted_homophily(path3, LabelSet(np.array([-1, -1, -1], dtype=np.int8)))
    with pytest.raises(GraphError):
        adjusted_homophily(path3, LabelSet(np.array([1, 1, 1], dtype=np.int8)))


# ------------------------------------------------------------- labels


def test_labelset_basics():
    labels = LabelSet(np.array([1, 0, -1, 1], dtype=np.int8))
    assert list(labels.labeled_indices) == [0, 1, 3]
    assert list(labels.unlabeled_indices) == [2]
    assert labels.labeled_count() == 3
    assert labels.prevalence() == pytest.approx(2.0 / 3.0)


def test_labelset_rejects_bad_values():
    with pytest.raises(GraphError):
        LabelSet(np.array([2, 0], dtype=np.int8))


def test_labelset_from_binary():
    labels = LabelSet.from_binary(np.array([1, 0, 1]))
    assert labels.labeled_count() == 3
    with pytest.raises(GraphError):
        LabelSet.from_binary(np.array([1, -1, 0]))


def test_labelset_masked():
    labels = LabelSet(np.array([1, 0, 1, 0], dtype=np.int8))
    kept = labels.masked(np.array([0, 3]))
    assert list(kept.values) == [1, -1, -1, 0]
    assert labels.values[1] == 0  # original untouched


def test_labelset_read_only():
    labels = LabelSet(np.array([1, 0], dtype=np.int8))
    with pytest.raises(ValueError):
        labels.values[0] = 0


@settings(max_examples=30, deadline=None)
@given(st.lists(st.sampled_from([-1, 0, 1]), min_size=1, max_size=40))
def test_labelset_partition_property(raw):
    labels = LabelSet(np.array(raw, dtype=np.int8))
    combined = np.concatenate([labels.labeled_indices, labels.unlabeled_indices])
    assert sorted(combined.tolist()) == list(range(len(raw)))
    assert labels.labeled_count() == sum(1 for v in raw if v != UNLABELED)


def test_check_features_validation():
    x = check_features([[1.0, 2.0], [3.0, 4.0]], 2)
    assert x.dtype == np.float64 and x.flags.c_contiguous
    with pytest.raises(GraphError):
        check_features([[1.0], [2.0]], 3)
    with pytest.raises(GraphError):
        check_features([1.0, 2.0], 2)
    with pytest.raises(GraphError):
        check_features([[np.nan], [1.0]], 2)
