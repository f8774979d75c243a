"""Graph representation of the network and its spectral quantities.

Nodes are 0-based internally. Edges keep the order in which they were given;
the induced complete graph enumerates pairs ``(i, j)``, ``i < j``,
lexicographically. In both incidence matrices the smaller node index carries
``+1``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DisconnectedGraphError, NetworkError, SpectrumError

ZERO_TOL = 1e-9


@dataclass(frozen=True)
class PowerNetwork:
    """Undirected weighted network with per-node coefficients ``d``.

    ``edges`` holds ``(i, j, a_ij)`` triples. Connectivity is not enforced here
    (a tripped network may be disconnected); :func:`build_incidence` rejects
    disconnected graphs.
    """

    n: int
    edges: tuple[tuple[int, int, float], ...]
    d: tuple[float, ...]
    disturbance_nodes: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple((int(i), int(j), float(a)) for i, j, a in self.edges))
        object.__setattr__(self, "d", tuple(float(x) for x in self.d))
        object.__setattr__(self, "disturbance_nodes", frozenset(int(k) for k in self.disturbance_nodes))
        if self.n < 2:
            raise NetworkError(f"need at least 2 nodes, got n={self.n}")
        if len(self.d) != self.n:
            raise NetworkError(f"expected {self.n} coefficients d, got {len(self.d)}")
        seen = set()
        for k, (i, j, a) in enumerate(self.edges):
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise NetworkError(f"edge {k} ({i}, {j}) references a node outside 0..{self.n - 1}")
            if i == j:
                raise NetworkError(f"edge {k} is a self-loop at node {i}")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise NetworkError(f"edge {k} duplicates pair {key}")
            seen.add(key)
            if not a > 0:
                raise NetworkError(f"edge {k} weight must be positive, got {a}")
        for i, x in enumerate(self.d):
            if not x > 0:
                raise NetworkError(f"d[{i}] must be positive, got {x}")
        for k in self.disturbance_nodes:
            if not 0 <= k < self.n:
                raise NetworkError(f"disturbance node {k} outside 0..{self.n - 1}")

    @property
    def m(self) -> int:
        return len(self.edges)

    @cached_property
    def tails(self) -> np.ndarray:
        """Smaller endpoint of each edge (the +1 row of ``B``)."""
        return np.array([min(i, j) for i, j, _ in self.edges], dtype=np.int64)

    @cached_property
    def heads(self) -> np.ndarray:
        return np.array([max(i, j) for i, j, _ in self.edges], dtype=np.int64)

    @cached_property
    def weights(self) -> np.ndarray:
        return np.array([a for _, _, a in self.edges], dtype=float)

    @cached_property
    def d_array(self) -> np.ndarray:
        return np.array(self.d, dtype=float)

    def components(self) -> list[set[int]]:
        parent = list(range(self.n))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for i, j, _ in self.edges:
            parent[find(i)] = find(j)
        groups: dict[int, set[int]] = {}
        for v in range(self.n):
            groups.setdefault(find(v), set()).add(v)
        return sorted(groups.values(), key=min)

    def is_connected(self) -> bool:
        return len(self.components()) == 1

    def has_edge(self, i: int, j: int) -> bool:
        key = (min(i, j), max(i, j))
        return any((min(a, b), max(a, b)) == key for a, b, _ in self.edges)

    def edge_index(self, i: int, j: int) -> int:
        key = (min(i, j), max(i, j))
        for k, (a, b, _) in enumerate(self.edges):
            if (min(a, b), max(a, b)) == key:
                return k
        raise NetworkError(f"no edge between nodes {i} and {j}")

    def without_edge(self, i: int, j: int) -> "PowerNetwork":
        k = self.edge_index(i, j)
        edges = self.edges[:k] + self.edges[k + 1:]
        return PowerNetwork(self.n, edges, self.d, self.disturbance_nodes)

    def with_d(self, d) -> "PowerNetwork":
        return PowerNetwork(self.n, self.edges, tuple(d), self.disturbance_nodes)

    def with_edge(self, i: int, j: int, a: float) -> "PowerNetwork":
        return PowerNetwork(self.n, self.edges + ((i, j, a),), self.d, self.disturbance_nodes)


@dataclass(frozen=True)
class IncidencePair:
    B: np.ndarray
    B_c: np.ndarray

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return list(itertools.combinations(range(self.B.shape[0]), 2))


def incidence_matrix(net: PowerNetwork) -> np.ndarray:
    B = np.zeros((net.n, net.m))
    cols = np.arange(net.m)
    B[net.tails, cols] = 1.0
    B[net.heads, cols] = -1.0
    return B


def complete_incidence(n: int) -> np.ndarray:
    pairs = list(itertools.combinations(range(n), 2))
    B_c = np.zeros((n, len(pairs)))
    for k, (i, j) in enumerate(pairs):
        B_c[i, k] = 1.0
        B_c[j, k] = -1.0
    return B_c


def build_incidence(net: PowerNetwork) -> IncidencePair:
    comps = net.components()
    if len(comps) > 1:
        raise DisconnectedGraphError(comps)
    return IncidencePair(incidence_matrix(net), complete_incidence(net.n))


def laplacian(net: PowerNetwork) -> np.ndarray:
    B = incidence_matrix(net)
    return (B * net.weights) @ B.T


def _sorted_eigenvalues(M: np.ndarray) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    return np.linalg.eigvalsh(0.5 * (M + M.T))


def algebraic_connectivity(L: np.ndarray) -> float:
    """Second-smallest eigenvalue of a weighted Laplacian."""
    ev = _sorted_eigenvalues(L)
    scale = max(np.linalg.norm(L, 2), 1.0)
    near_zero = int(np.sum(np.abs(ev) <= ZERO_TOL * scale))
    if near_zero > 1:
        raise SpectrumError(f"disconnected graph: {near_zero} near-zero Laplacian eigenvalues")
    return float(ev[1])


def q_matrix(net: PowerNetwork, pair: IncidencePair | None = None) -> np.ndarray:
    """Edge-space matrix ``A_v B^T D^{-1} B A_v``."""
    B = pair.B if pair is not None else incidence_matrix(net)
    BA = B * net.weights
    return BA.T @ (BA / net.d_array[:, None])


def smallest_nonzero_eigenvalue(Q: np.ndarray, tol: float = ZERO_TOL) -> float:
    ev = _sorted_eigenvalues(Q)
    scale = np.linalg.norm(Q, 2)
    nonzero = ev[ev > tol * scale]
    if nonzero.size == 0:
        raise SpectrumError("all eigenvalues are numerically zero")
    return float(nonzero.min())


@dataclass(frozen=True)
class Spectrum:
    lambda2: float
    lambda_s_Q: float


def spectrum(net: PowerNetwork) -> Spectrum:
    pair = build_incidence(net)
    return Spectrum(
        algebraic_connectivity(laplacian(net)),
        smallest_nonzero_eigenvalue(q_matrix(net, pair)),
    )
