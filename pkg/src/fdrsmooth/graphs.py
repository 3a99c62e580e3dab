"""Site graphs, oriented incidence matrices, and plateau counting.

Nodes are dense integer ids ``0..n-1``. For grid graphs the id convention is
``id = row * cols + col`` (row-major).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

__all__ = [
    "SiteGraph",
    "build_grid_graph",
    "oriented_incidence",
    "Plateau",
    "PlateauSet",
    "count_plateaus",
]


@dataclass(frozen=True)
class SiteGraph:
    """Undirected simple graph over test sites.

    Edges are stored as ``(j, k)`` pairs with ``j < k``, deduplicated and
    sorted, so two graphs over the same sites compare equal iff they have the
    same edge set.
    """

    n_nodes: int
    edges: tuple[tuple[int, int], ...]
    # set by build_grid_graph; lets solvers pick grid-specific fast paths
    grid_shape: tuple[int, int] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ValueError(f"graph needs at least one node, got {self.n_nodes}")
        for j, k in self.edges:
            if not (0 <= j < k < self.n_nodes):
                raise ValueError(f"edge ({j}, {k}) invalid for n_nodes={self.n_nodes}")
        if len(set(self.edges)) != len(self.edges):
            raise ValueError("duplicate edges")

    @classmethod
    def from_edges(cls, n_nodes: int, edges) -> "SiteGraph":
        """Build a graph from an arbitrary iterable of node-id pairs.

        Pairs are canonicalized to ``j < k``; duplicates collapse. Self-loops
        are rejected.
        """
        canon = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self-loop at node {u}")
            canon.add((u, v) if u < v else (v, u))
        return cls(n_nodes=int(n_nodes), edges=tuple(sorted(canon)))

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def edge_array(self) -> np.ndarray:
        """Edges as an (m, 2) int array; empty graphs give shape (0, 2)."""
        if not self.edges:
            return np.empty((0, 2), dtype=np.int64)
        return np.asarray(self.edges, dtype=np.int64)

    @cached_property
    def adjacency(self) -> tuple[np.ndarray, np.ndarray]:
        """CSR-style adjacency: (indptr, neighbor ids), both int arrays."""
        deg = np.zeros(self.n_nodes, dtype=np.int64)
        ea = self.edge_array
        np.add.at(deg, ea[:, 0], 1)
        np.add.at(deg, ea[:, 1], 1)
        indptr = np.zeros(self.n_nodes + 1, dtype=np.int64)
        np.cumsum(deg, out=indptr[1:])
        indices = np.empty(indptr[-1], dtype=np.int64)
        cursor = indptr[:-1].copy()
        for j, k in ea:
            indices[cursor[j]] = k
            cursor[j] += 1
            indices[cursor[k]] = j
            cursor[k] += 1
        return indptr, indices

    @cached_property
    def is_chain(self) -> bool:
        """True iff the edge set is exactly {(i, i+1)} in id order."""
        if self.n_edges != self.n_nodes - 1:
            return False
        return self.edges == tuple((i, i + 1) for i in range(self.n_nodes - 1))


def build_grid_graph(rows: int, cols: int) -> SiteGraph:
    """4-neighbor lattice on a rows-by-cols grid, node id = row * cols + col."""
    if rows < 1 or cols < 1:
        raise ValueError(f"grid dimensions must be positive, got {rows}x{cols}")
    edges = []
    for r in range(rows):
        base = r * cols
        for c in range(cols):
            u = base + c
            if c + 1 < cols:
                edges.append((u, u + 1))
            if r + 1 < rows:
                edges.append((u, u + cols))
    return SiteGraph(n_nodes=rows * cols, edges=tuple(sorted(edges)),
                     grid_shape=(rows, cols))


def oriented_incidence(graph: SiteGraph) -> sp.csr_matrix:
    """Oriented incidence matrix D (m x n): row i has +1 at j, -1 at k for edge (j, k).

    For any vector b, ``abs(D @ b).sum()`` equals the sum of |b_j - b_k| over
    edges, and each row sums to zero.
    """
    m, n = graph.n_edges, graph.n_nodes
    ea = graph.edge_array
    rows = np.repeat(np.arange(m), 2)
    cols = ea.reshape(-1)
    data = np.tile(np.array([1.0, -1.0]), m)
    return sp.csr_matrix((data, (rows, cols)), shape=(m, n))


@dataclass
class Plateau:
    """A maximal flood-filled region: member node ids plus the seed's value."""

    nodes: np.ndarray
    value: float


@dataclass
class PlateauSet:
    """Partition of the node set into plateaus, in discovery order."""

    plateaus: list[Plateau]
    n_nodes: int

    def __len__(self) -> int:
        return len(self.plateaus)

    @property
    def labels(self) -> np.ndarray:
        """Per-node plateau index."""
        lab = np.full(self.n_nodes, -1, dtype=np.int64)
        for i, p in enumerate(self.plateaus):
            lab[p.nodes] = i
        return lab


def count_plateaus(values, graph: SiteGraph, eps: float = 1e-5) -> PlateauSet:
    """Partition nodes into plateaus by breadth-first flood fill.

    A plateau grows from a seed node: any unclaimed neighbor whose value lies
    in the fixed band [seed - eps, seed + eps] joins. The band is anchored at
    the seed, not chained, so slow drifts cannot string distant values into
    one region. Each node is examined at most once per incident edge, so the
    total cost is linear in nodes plus edges.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.size != graph.n_nodes:
        raise ValueError(f"values must have length {graph.n_nodes}, got shape {values.shape}")
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")

    indptr, indices = graph.adjacency
    # The seed joins its own visited set immediately; leaving it out would let
    # a later overlapping band claim it twice and break the partition.
    claimed = np.zeros(graph.n_nodes, dtype=bool)
    plateaus: list[Plateau] = []
    for seed in range(graph.n_nodes):
        if claimed[seed]:
            continue
        claimed[seed] = True
        lo, hi = values[seed] - eps, values[seed] + eps
        members = [seed]
        frontier = [seed]
        while frontier:
            node = frontier.pop()
            for nb in indices[indptr[node]:indptr[node + 1]]:
                if not claimed[nb] and lo <= values[nb] <= hi:
                    claimed[nb] = True
                    members.append(nb)
                    frontier.append(nb)
        plateaus.append(Plateau(nodes=np.asarray(sorted(members), dtype=np.int64),
                                value=float(values[seed])))
    return PlateauSet(plateaus=plateaus, n_nodes=graph.n_nodes)
