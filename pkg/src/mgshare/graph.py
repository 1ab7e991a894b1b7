"""Undirected weighted communication graph between inverter units.

Provides the Laplacian algebra used by the distributed optimizer and the
stability machinery: L = D - A, the algebraic connectivity sigma_2, and the
consensus gain matrix K = (I + k L)^-1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DisconnectedGraphError

__all__ = ["CommGraph", "laplacian", "algebraic_connectivity", "consensus_gain_matrix"]


@dataclass(frozen=True)
class CommGraph:
    """Connected, undirected, weighted communication topology.

    ``adjacency`` is the symmetric nonnegative matrix [a_ij] with zero
    diagonal; one node per inverter unit. Construction fails on a
    disconnected graph so downstream consensus results are well defined.
    """

    adjacency: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.adjacency, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"adjacency must be square, got shape {a.shape}")
        if a.shape[0] < 2:
            raise ValueError("graph needs at least 2 nodes")
        if np.any(a < 0):
            raise ValueError("edge weights must be nonnegative")
        if not np.array_equal(a, a.T):
            raise ValueError("adjacency must be symmetric")
        if np.any(np.diag(a) != 0):
            raise ValueError("adjacency diagonal must be zero")
        a.setflags(write=False)
        object.__setattr__(self, "adjacency", a)
        if not _connected(a):
            raise DisconnectedGraphError(
                "communication graph is disconnected; consensus is impossible"
            )

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def edges(self) -> list[tuple[int, int, float]]:
        """Undirected edge list as (i, j, weight) with i < j, 0-based."""
        a = self.adjacency
        ii, jj = np.nonzero(np.triu(a) > 0)
        return [(int(i), int(j), float(a[i, j])) for i, j in zip(ii, jj)]

    @staticmethod
    def from_edges(n: int, edges, default_weight: float = 1.0) -> "CommGraph":
        """Build from 0-based (i, j) or (i, j, weight) pairs."""
        a = np.zeros((n, n))
        for e in edges:
            if len(e) == 2:
                i, j = e
                w = default_weight
            else:
                i, j, w = e
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            a[i, j] = a[j, i] = w
        return CommGraph(a)

    @staticmethod
    def ring(n: int, weight: float = 1.0) -> "CommGraph":
        """Unit-weight ring on n nodes (the bundled default topology)."""
        return CommGraph.from_edges(n, [(i, (i + 1) % n) for i in range(n)], weight)


def _connected(a: np.ndarray) -> bool:
    """Breadth-first search reachability over positive-weight edges."""
    n = a.shape[0]
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        i = stack.pop()
        for j in np.nonzero(a[i] > 0)[0]:
            if not seen[j]:
                seen[j] = True
                stack.append(int(j))
    return bool(seen.all())


def laplacian(g: CommGraph) -> np.ndarray:
    """Graph Laplacian L = D - A with D = diag of row sums of A."""
    a = g.adjacency
    return np.diag(a.sum(axis=1)) - a


def algebraic_connectivity(g: CommGraph) -> float:
    """Second-smallest Laplacian eigenvalue sigma_2 (> 0: graph is connected)."""
    w = np.linalg.eigvalsh(laplacian(g))
    return float(w[1])


def consensus_gain_matrix(g: CommGraph, k: float) -> np.ndarray:
    """K = (I + k L)^-1; symmetric positive definite with K @ 1 = 1."""
    if k < 0:
        raise ValueError("consensus gain k must be nonnegative")
    n = g.n
    return np.linalg.inv(np.eye(n) + k * laplacian(g))
