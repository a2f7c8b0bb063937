"""Undirected graphs, degree-sorted BFS ordering, subgraph windows and l x l patches."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on vertices ``0..n-1``.

    Edges are stored as sorted pairs ``(u, v)`` with ``u < v``; the constructor
    accepts pairs in any orientation but rejects self-loops and out-of-range
    endpoints.
    """

    n: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n < 0:
            raise ValueError(f"vertex count must be non-negative, got {self.n}")
        norm = set()
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self-loop ({u}, {v}) not allowed")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u}, {v}) outside [0, {self.n})")
            norm.add((min(u, v), max(u, v)))
        object.__setattr__(self, "edges", frozenset(norm))

    @classmethod
    def from_adjacency(cls, adj) -> "Graph":
        adj = np.asarray(adj)
        rows, cols = np.nonzero(np.tril(adj, -1))
        return cls(adj.shape[0], frozenset(zip(rows.tolist(), cols.tolist())))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def edge_list(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def neighbors(self) -> list[list[int]]:
        nbrs: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            nbrs[u].append(v)
            nbrs[v].append(u)
        return nbrs

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=np.int8)
        for u, v in self.edges:
            a[u, v] = a[v, u] = 1
        return a

    def relabel(self, perm) -> "Graph":
        """Graph with vertex ``v`` renamed to ``perm[v]``."""
        perm = np.asarray(perm)
        return Graph(self.n, frozenset((int(perm[u]), int(perm[v])) for u, v in self.edges))


@dataclass(frozen=True)
class CanonicalGraph:
    """A graph reindexed into canonical order.

    ``graph`` uses canonical indices; ``order[k]`` is the input vertex placed at
    canonical position ``k``.
    """

    graph: Graph
    order: tuple

    @property
    def n(self) -> int:
        return self.graph.n

    def adjacency(self) -> np.ndarray:
        return self.graph.adjacency()


def _priority(deg: np.ndarray):
    return lambda v: (-int(deg[v]), v)


def canonical_order(g: Graph) -> CanonicalGraph:
    """Reindex ``g`` by breadth-first search from a maximum-degree vertex.

    Vertices are ranked by (degree descending, index ascending). BFS starts at
    the top-ranked vertex and enqueues neighbours in rank order; when a
    component is exhausted it restarts from the best-ranked unvisited vertex.
    """
    deg = g.degrees()
    key = _priority(deg)
    ranked = sorted(range(g.n), key=key)
    nbrs = [sorted(ns, key=key) for ns in g.neighbors()]
    seen = np.zeros(g.n, dtype=bool)
    order: list[int] = []
    for root in ranked:
        if seen[root]:
            continue
        seen[root] = True
        queue = deque([root])
        while queue:
            v = queue.popleft()
            order.append(v)
            for w in nbrs[v]:
                if not seen[w]:
                    seen[w] = True
                    queue.append(w)
    position = np.empty(g.n, dtype=np.int64)
    position[order] = np.arange(g.n)
    return CanonicalGraph(g.relabel(position), tuple(order))


def permute_graph(g: Graph, seed) -> Graph:
    """Relabel ``g`` by a uniformly random permutation drawn from ``seed``."""
    rng = np.random.default_rng(seed)
    return g.relabel(rng.permutation(g.n))


def extract_window_subgraph(g: CanonicalGraph, start: int, size: int) -> CanonicalGraph:
    """Induced subgraph on canonical positions ``start .. start+size-1``.

    The window keeps the parent's canonical order; indices are shifted to
    start at zero.
    """
    if size < 1 or start < 0 or start + size > g.n:
        raise ValueError(f"window [{start}, {start + size}) out of range for n={g.n}")
    stop = start + size
    edges = frozenset(
        (u - start, v - start) for u, v in g.graph.edges if start <= u < stop and start <= v < stop
    )
    return CanonicalGraph(Graph(size, edges), tuple(range(size)))


def num_blocks(n: int, l: int) -> int:
    return -(-n // l)


@dataclass(frozen=True)
class PatchGrid:
    """Lower-triangular l x l block decomposition of an adjacency matrix.

    ``padded`` is the ``(n_blocks*l, n_blocks*l)`` matrix holding ``A[i, j]``
    strictly below the diagonal and -1 at/above it and in the padding. Block
    ``(I, J)`` (1-based, ``I >= J``) covers rows ``(I-1)l .. Il-1`` and
    columns ``(J-1)l .. Jl-1`` of it.
    """

    l: int
    n: int
    n_blocks: int
    padded: np.ndarray

    def block(self, I: int, J: int) -> np.ndarray:
        if not 1 <= J <= I <= self.n_blocks:
            raise KeyError((I, J))
        l = self.l
        return self.padded[(I - 1) * l:I * l, (J - 1) * l:J * l]

    @property
    def blocks(self) -> dict:
        N = self.n_blocks
        return {(I, J): self.block(I, J) for I in range(1, N + 1) for J in range(1, I + 1)}

    def layer(self, offset: int) -> np.ndarray:
        """Row-major flattened blocks ``(J + offset, J)`` for ``J = 1 .. N - offset``.

        Shape ``(N - offset, l*l)``.
        """
        N, l = self.n_blocks, self.l
        out = np.empty((N - offset, l * l), dtype=self.padded.dtype)
        for k, J in enumerate(range(1, N - offset + 1)):
            out[k] = self.block(J + offset, J).reshape(-1)
        return out

    def adjacency(self) -> np.ndarray:
        """Rebuild the symmetric 0/1 adjacency matrix from the stored entries."""
        low = np.tril(self.padded[:self.n, :self.n], -1)
        a = np.clip(low, 0, 1).astype(np.int8)
        return a + a.T


def to_patch_grid(g, l: int) -> PatchGrid:
    if l < 1:
        raise ValueError(f"patch side must be positive, got {l}")
    graph = g.graph if isinstance(g, CanonicalGraph) else g
    n = graph.n
    N = num_blocks(n, l)
    size = N * l
    padded = np.full((size, size), -1, dtype=np.int8)
    a = graph.adjacency()
    rows, cols = np.tril_indices(n, -1)
    padded[rows, cols] = a[rows, cols]
    return PatchGrid(l, n, N, padded)


def graphs_isomorphic_by(g: Graph, h: Graph, mapping: Iterable[int]) -> bool:
    """True when ``mapping`` (vertex of ``g`` -> vertex of ``h``) carries edges onto edges."""
    mapping = list(mapping)
    if g.n != h.n or len(mapping) != g.n:
        return False
    return g.relabel(mapping).edges == h.edges
