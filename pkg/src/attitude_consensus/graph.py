"""Communication topologies and the structural checks the stability results need.

Adjacency follows the receiving convention: ``adjacency[i, j] == 1`` means
agent ``i`` receives information from ``j`` (``j`` is a neighbour of ``i``).
For directed graphs with a reference, the reference is an extra node whose
index is given by ``reference``.
"""
from collections import deque
from dataclasses import dataclass, field

import numpy as np


class GraphError(ValueError):
    """Raised for malformed graphs or when a graph fails a required property."""


@dataclass(frozen=True)
class CommGraph:
    """Unweighted communication graph over ``n`` agents.

    Attributes:
        n: number of agents.
        directed: whether edges are one-way.
        adjacency: ``(N, N)`` 0/1 matrix, ``N = n`` or ``n + 1`` when a
            reference node is present.
        reference: index of the reference node (always ``n``), or None.
    """

    n: int
    directed: bool
    adjacency: np.ndarray = field(repr=False)
    reference: int | None = None

    def __post_init__(self):
        A = np.array(self.adjacency, dtype=int)
        size = self.n + (1 if self.reference is not None else 0)
        if A.shape != (size, size):
            raise GraphError(f"adjacency must be {size}x{size}, got {A.shape}")
        if self.reference is not None and self.reference != self.n:
            raise GraphError("the reference node must be stored at index n")
        if np.any((A != 0) & (A != 1)):
            raise GraphError("adjacency entries must be 0 or 1")
        if np.any(np.diag(A) != 0):
            raise GraphError("self-loops are not allowed")
        if not self.directed and np.any(A != A.T):
            raise GraphError("undirected adjacency must be symmetric")
        if self.reference is not None and np.any(A[self.reference] != 0):
            raise GraphError("the reference node cannot receive information")
        A.setflags(write=False)
        object.__setattr__(self, "adjacency", A)

    @classmethod
    def from_edges(cls, n, edges, directed=False, with_reference=False):
        """Build a graph from ``(source, target)`` pairs of 0-based indices.

        For directed graphs the pair ``(j, i)`` means ``j -> i`` (``i``
        receives from ``j``). The reference, when present, has index ``n``.
        """
        size = n + (1 if with_reference else 0)
        A = np.zeros((size, size), dtype=int)
        for src, dst in edges:
            if not (0 <= src < size and 0 <= dst < size):
                raise GraphError(f"edge ({src}, {dst}) references an unknown node")
            if src == dst:
                raise GraphError(f"self-loop on node {src}")
            A[dst, src] = 1
            if not directed:
                A[src, dst] = 1
        return cls(n, directed, A, n if with_reference else None)

    @property
    def size(self):
        return self.adjacency.shape[0]

    def neighbors(self, i):
        """Nodes that ``i`` receives from, in increasing order."""
        self._check_index(i)
        return [int(j) for j in np.flatnonzero(self.adjacency[i])]

    def edges(self):
        """Receiving pairs ``(i, j)`` with ``a_ij = 1``, row-major."""
        rows, cols = np.nonzero(self.adjacency)
        return list(zip(rows.tolist(), cols.tolist()))

    def edge_count(self):
        m = int(self.adjacency.sum())
        return m if self.directed else m // 2

    def _check_index(self, i):
        if not 0 <= i < self.size:
            raise IndexError(f"node {i} out of range for graph with {self.size} nodes")


def degree(g, i):
    """Row sum ``delta_i = sum_j a_ij`` (number of neighbours of ``i``)."""
    g._check_index(i)
    return int(g.adjacency[i].sum())


def in_degree(g, i):
    """Number of in-neighbours of ``i`` in a digraph (same row sum)."""
    return degree(g, i)


def out_degree(g, i):
    g._check_index(i)
    return int(g.adjacency[:, i].sum())


def _reachable(adjacency, start, follow_out):
    # follow_out: traverse j -> i edges, i.e. from a node to those that receive from it
    seen = {start}
    queue = deque([start])
    while queue:
        k = queue.popleft()
        nxt = np.flatnonzero(adjacency[:, k] if follow_out else adjacency[k])
        for m in nxt.tolist():
            if m not in seen:
                seen.add(m)
                queue.append(m)
    return seen


def is_connected_tree(g):
    """True iff the undirected graph is connected with exactly ``size - 1`` edges."""
    if g.directed:
        raise GraphError("is_connected_tree expects an undirected graph")
    if g.size == 0:
        return False
    if g.edge_count() != g.size - 1:
        return False
    return len(_reachable(g.adjacency, 0, follow_out=False)) == g.size


def is_directed_out_tree(g, root=None):
    """True iff ``root`` has in-degree 0, every other node in-degree 1, and all
    nodes are reachable from ``root``. ``root`` defaults to the reference node.
    """
    if root is None:
        root = g.reference if g.reference is not None else 0
    g._check_index(root)
    A = g.adjacency
    indeg = A.sum(axis=1)
    if indeg[root] != 0:
        return False
    others = [k for k in range(g.size) if k != root]
    if any(indeg[k] != 1 for k in others):
        return False
    return len(_reachable(A, root, follow_out=True)) == g.size


def leaves(g):
    """Nodes of degree one in an undirected graph."""
    if g.directed:
        raise GraphError("leaves() expects an undirected graph")
    return [int(k) for k in np.flatnonzero(g.adjacency.sum(axis=1) == 1)]


def tree_center(g):
    """Last node left when leaves are pruned repeatedly (smallest index on ties)."""
    if not is_connected_tree(g):
        raise GraphError("tree_center() expects a connected tree")
    remaining = set(range(g.size))
    A = g.adjacency.copy()
    while len(remaining) > 2:
        deg = A.sum(axis=1)
        layer = [k for k in remaining if deg[k] <= 1]
        for k in layer:
            remaining.discard(k)
            A[k, :] = 0
            A[:, k] = 0
    return min(remaining)


def path_graph(n):
    """Undirected path ``0 - 1 - ... - (n-1)``."""
    return CommGraph.from_edges(n, [(k, k + 1) for k in range(n - 1)])


def reference_chain(n):
    """Directed chain ``ref -> 0 -> 1 -> ... -> (n-1)`` with the reference at index n."""
    edges = [(n, 0)] + [(k, k + 1) for k in range(n - 1)]
    return CommGraph.from_edges(n, edges, directed=True, with_reference=True)
