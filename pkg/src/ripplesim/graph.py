"""Undirected graphs shared by the physical models and the communication overlay."""
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import ModelError


@dataclass(frozen=True)
class Graph:
    """Immutable undirected graph over dense 0-based node indices.

    Edges are stored as canonical (low, high) pairs. An optional weight may
    accompany each edge (e.g. a line susceptance).
    """

    node_count: int
    edges: tuple
    weights: tuple | None = None

    def __post_init__(self):
        if self.node_count < 1:
            raise ModelError("graph needs at least one node")
        canon = []
        seen = set()
        for e in self.edges:
            m, n = int(e[0]), int(e[1])
            if m == n:
                raise ModelError(f"self-loop at node {m}")
            if not (0 <= m < self.node_count and 0 <= n < self.node_count):
                raise ModelError(f"edge ({m},{n}) outside node range")
            pair = (min(m, n), max(m, n))
            if pair in seen:
                raise ModelError(f"duplicate edge {pair}")
            seen.add(pair)
            canon.append(pair)
        object.__setattr__(self, "edges", tuple(canon))
        if self.weights is not None:
            w = tuple(float(x) for x in self.weights)
            if len(w) != len(canon):
                raise ModelError("weights must align with edges")
            object.__setattr__(self, "weights", w)

    def neighbors(self, node):
        """Adjacent node indices, ascending."""
        out = [n for m, n in self.edges if m == node]
        out += [m for m, n in self.edges if n == node]
        return tuple(sorted(out))

    def degree(self, node):
        return len(self.neighbors(node))


def adjacency_matrix(g: Graph) -> np.ndarray:
    """Symmetric 0/1 adjacency matrix with zero diagonal."""
    a = np.zeros((g.node_count, g.node_count))
    for m, n in g.edges:
        a[m, n] = 1.0
        a[n, m] = 1.0
    return a


def is_connected(g: Graph) -> bool:
    """True iff every node is reachable from node 0 (breadth-first)."""
    seen = {0}
    queue = deque([0])
    adj = [[] for _ in range(g.node_count)]
    for m, n in g.edges:
        adj[m].append(n)
        adj[n].append(m)
    while queue:
        v = queue.popleft()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return len(seen) == g.node_count


def weighted_laplacian(g: Graph, weights=None) -> np.ndarray:
    """Weighted Laplacian: off-diagonal -w for edges, diagonal = row-wise sum.

    Rows sum to zero; the matrix is symmetric and diagonally dominant.
    Weights must be strictly positive.
    """
    if weights is None:
        weights = g.weights
    if weights is None:
        raise ModelError("no edge weights given")
    w = np.asarray(weights, dtype=float)
    if w.shape != (len(g.edges),):
        raise ModelError("weights must align with edges")
    if np.any(w <= 0):
        raise ModelError("edge weights must be positive")
    lap = np.zeros((g.node_count, g.node_count))
    for (m, n), wmn in zip(g.edges, w):
        lap[m, n] -= wmn
        lap[n, m] -= wmn
        lap[m, m] += wmn
        lap[n, n] += wmn
    return lap
