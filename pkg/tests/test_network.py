import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kurasync import data
from kurasync.errors import DisconnectedGraphError, NetworkError, SpectrumError
from kurasync.network import (
    PowerNetwork,
    algebraic_connectivity,
    build_incidence,
    laplacian,
    q_matrix,
    smallest_nonzero_eigenvalue,
    spectrum,
)


def path(n, a=1.0, d=None):
    d = d or (1.0,) * n
    return PowerNetwork(n, tuple((k, k + 1, a) for k in range(n - 1)), d)


def complete(n, a=1.0):
    return PowerNetwork(n, tuple((i, j, a) for i, j in itertools.combinations(range(n), 2)), (1.0,) * n)


def test_two_node_incidence():
    pair = build_incidence(path(2))
    np.testing.assert_array_equal(pair.B, [[1.0], [-1.0]])
    np.testing.assert_array_equal(pair.B_c, [[1.0], [-1.0]])


def test_path_counts():
    pair = build_incidence(path(3))
    assert pair.B.shape == (3, 2)
    assert pair.B_c.shape == (3, 3)


def test_ieee9_shapes():
    pair = build_incidence(data.ieee9("ieee9_set1", seed=0))
    assert pair.B.shape == (9, 9)
    assert pair.B_c.shape == (9, 36)


def test_incidence_invariants():
    net = data.ieee9("ieee9_set2", seed=3)
    pair = build_incidence(net)
    for M in (pair.B, pair.B_c):
        assert np.all(np.sort(M, axis=0)[0] == -1) and np.all(np.sort(M, axis=0)[-1] == 1)
        assert np.all(np.sum(M != 0, axis=0) == 2)
        np.testing.assert_array_equal(M.sum(axis=0), 0.0)
    cols = {tuple(c) for c in pair.B_c.T}
    for c in pair.B.T:
        assert tuple(c) in cols or tuple(-c) in cols
    assert pair.pairs[:3] == [(0, 1), (0, 2), (0, 3)]


def test_sign_convention_smaller_index_positive():
    net = PowerNetwork(3, ((2, 0, 1.0), (1, 2, 1.0)), (1.0, 1.0, 1.0))
    B = build_incidence(net).B
    assert B[0, 0] == 1 and B[2, 0] == -1
    assert B[1, 1] == 1 and B[2, 1] == -1


def test_disconnected_rejected_with_components():
    net = PowerNetwork(4, ((0, 1, 1.0), (2, 3, 1.0)), (1.0,) * 4)
    with pytest.raises(DisconnectedGraphError) as exc:
        build_incidence(net)
    assert sorted(map(sorted, exc.value.components)) == [[0, 1], [2, 3]]


@pytest.mark.parametrize(
    "edges, d",
    [
        (((0, 0, 1.0),), (1.0, 1.0)),
        (((0, 1, -1.0),), (1.0, 1.0)),
        (((0, 1, 1.0), (1, 0, 2.0)), (1.0, 1.0)),
        (((0, 1, 1.0),), (1.0, 0.0)),
        (((0, 2, 1.0),), (1.0, 1.0)),
    ],
)
def test_invalid_networks(edges, d):
    with pytest.raises(NetworkError):
        PowerNetwork(2, edges, d)


def test_laplacian_two_node():
    np.testing.assert_allclose(laplacian(path(2, a=3.0)), [[3, -3], [-3, 3]])


def test_complete_graph_spectrum():
    ev = np.linalg.eigvalsh(laplacian(complete(3)))
    np.testing.assert_allclose(ev, [0, 3, 3], atol=1e-12)


def test_laplacian_identities():
    net = data.ieee9("ieee9_set1", seed=1)
    L = laplacian(net)
    B = build_incidence(net).B
    np.testing.assert_allclose(L @ np.ones(9), 0.0, atol=1e-12)
    np.testing.assert_allclose(L, B @ np.diag(net.weights) @ B.T, atol=1e-12)


def test_lambda2_values():
    assert algebraic_connectivity(laplacian(path(2))) == pytest.approx(2.0)
    assert algebraic_connectivity(laplacian(data.ieee9("ieee9_set1", seed=0))) == pytest.approx(4.0147, abs=1e-3)
    assert algebraic_connectivity(laplacian(data.ieee9("ieee9_set2", seed=0))) == pytest.approx(4.5773, abs=1e-3)


def test_lambda2_disconnected_error():
    L = np.zeros((3, 3))
    L[:2, :2] = [[1, -1], [-1, 1]]
    with pytest.raises(SpectrumError, match="disconnected"):
        algebraic_connectivity(L)


def test_q_matrix_single_edge():
    net = PowerNetwork(2, ((0, 1, 2.0),), (1.0, 4.0))
    np.testing.assert_allclose(q_matrix(net), [[4.0 * (1 + 0.25)]])
    np.testing.assert_allclose(q_matrix(path(2)), [[2.0]])


def test_smallest_nonzero_eigenvalue():
    assert smallest_nonzero_eigenvalue(np.diag([0.0, 2.0, 5.0])) == pytest.approx(2.0)
    assert smallest_nonzero_eigenvalue(np.array([[3.0]])) == pytest.approx(3.0)
    with pytest.raises(SpectrumError):
        smallest_nonzero_eigenvalue(np.zeros((2, 2)))


def test_smallest_nonzero_vs_dense_oracle():
    rng = np.random.default_rng(0)
    G = rng.normal(size=(5, 3))
    Q = G @ G.T
    ev = np.linalg.eigvals(Q).real
    expected = min(v for v in ev if v > 1e-9 * np.abs(ev).max())
    assert smallest_nonzero_eigenvalue(Q) == pytest.approx(expected, abs=1e-9)


def test_q_null_space_is_cycle_space():
    net = data.ieee9("ieee9_set1", seed=0)
    Q = q_matrix(net)
    ev = np.linalg.eigvalsh(Q)
    nullity = int(np.sum(ev < 1e-9 * ev.max()))
    rank_b = np.linalg.matrix_rank(build_incidence(net).B)
    assert nullity == net.m - rank_b == 1


def test_spectrum_dataclass():
    s = spectrum(data.ieee9("ieee9_set1", seed=0))
    assert s.lambda2 == pytest.approx(4.0147, abs=1e-3)
    assert s.lambda_s_Q > 0


@st.composite
def connected_graphs(draw):
    n = draw(st.integers(3, 7))
    edges = {(k, k + 1) for k in range(n - 1)}
    extra = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=8))
    for i, j in extra:
        if i != j:
            edges.add((min(i, j), max(i, j)))
    weights = draw(st.lists(st.floats(0.1, 10.0), min_size=len(edges), max_size=len(edges)))
    return n, sorted(edges), weights


@settings(max_examples=60, deadline=None)
@given(connected_graphs(), st.floats(0.1, 5.0))
def test_adding_edge_never_decreases_lambda2(graph, a_new):
    n, edges, w = graph
    net = PowerNetwork(n, tuple((i, j, a) for (i, j), a in zip(edges, w)), (1.0,) * n)
    missing = [(i, j) for i, j in itertools.combinations(range(n), 2) if not net.has_edge(i, j)]
    if not missing:
        return
    lam = algebraic_connectivity(laplacian(net))
    bigger = net.with_edge(*missing[0], a_new)
    assert algebraic_connectivity(laplacian(bigger)) >= lam - 1e-9
