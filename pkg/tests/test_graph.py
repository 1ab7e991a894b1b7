"""Communication-graph invariants and oracles."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mgshare import (
    CommGraph,
    DisconnectedGraphError,
    algebraic_connectivity,
    consensus_gain_matrix,
    laplacian,
)

RING5_SIGMA2 = 2.0 - 2.0 * np.cos(2.0 * np.pi / 5.0)  # frozen spectral oracle


def test_ring_laplacian_structure():
    g = CommGraph.ring(5)
    L = laplacian(g)
    assert np.allclose(L @ np.ones(5), 0.0)
    assert np.allclose(L, L.T)
    assert np.allclose(np.diag(L), 2.0)


def test_ring5_algebraic_connectivity_oracle():
    assert algebraic_connectivity(CommGraph.ring(5)) == pytest.approx(RING5_SIGMA2, abs=1e-12)


def test_two_node_connectivity():
    g = CommGraph.from_edges(2, [(0, 1)])
    # path graph K2: sigma2 = 2 (eigenvalues 0, 2)
    assert algebraic_connectivity(g) == pytest.approx(2.0, abs=1e-12)


def test_consensus_gain_rows_sum_to_one():
    g = CommGraph.ring(5)
    K = consensus_gain_matrix(g, 7.24)
    assert np.allclose(K @ np.ones(5), np.ones(5), atol=1e-12)


def test_consensus_gain_zero_k_identity():
    g = CommGraph.ring(4)
    assert np.allclose(consensus_gain_matrix(g, 0.0), np.eye(4))


def test_disconnected_rejected():
    A = np.zeros((4, 4))
    A[0, 1] = A[1, 0] = 1.0
    A[2, 3] = A[3, 2] = 1.0
    with pytest.raises(DisconnectedGraphError):
        CommGraph(A)


def test_asymmetric_rejected():
    A = np.zeros((3, 3))
    A[0, 1] = 1.0
    with pytest.raises(Exception):
        CommGraph(A)


def test_negative_weight_rejected():
    A = np.zeros((3, 3))
    A[0, 1] = A[1, 0] = -1.0
    A[1, 2] = A[2, 1] = 1.0
    with pytest.raises(Exception):
        CommGraph(A)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(3, 8), seed=st.integers(0, 10_000))
def test_random_connected_graph_properties(n, seed):
    """On a ring plus random chords: L psd with a single zero mode, sigma2 > 0."""
    rng = np.random.default_rng(seed)
    edges = [(i, (i + 1) % n) for i in range(n)]
    for _ in range(rng.integers(0, n)):
        i, j = rng.choice(n, 2, replace=False)
        edges.append((int(i), int(j)))
    g = CommGraph.from_edges(n, [(i, j) for i, j in edges if i != j])
    L = laplacian(g)
    w = np.linalg.eigvalsh(L)
    assert w[0] == pytest.approx(0.0, abs=1e-9)
    assert w[1] > 1e-9
    assert algebraic_connectivity(g) == pytest.approx(w[1], abs=1e-9)
