"""Pseudo-undirected graphs and their derived matrices.

Every undirected edge ``{i, j}`` is carried as two directed edges ``e_ij`` and
``e_ji`` with independent weights.  The directed edge ``e_ij`` means that
vertex ``i`` listens to vertex ``j``: it contributes ``-w_ij`` to entry
``(i, j)`` of the Laplacian and ``+w_ij`` to the diagonal of row ``i``.

Vertices are labelled ``1..n`` at the API boundary; matrix row ``k - 1``
belongs to vertex ``k``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import NDArray

from .errors import (
    DisconnectedError,
    DuplicateEdgeError,
    GraphError,
    HalfZeroWeightPairError,
    SelfLoopError,
)

__all__ = [
    "EdgePair",
    "PseudoUndirectedGraph",
    "IncidenceDecomposition",
    "build_graph",
    "laplacian",
    "adjacency",
    "degree_matrix",
    "incidence_decomposition",
    "skeleton_neighbors",
    "is_connected",
    "diameter",
    "cycle_graph",
    "star_graph",
    "cycle_weights",
    "star_weights",
]


@dataclass(frozen=True)
class EdgePair:
    """One undirected edge ``{i, j}`` (``i < j``) with both directed weights."""

    i: int
    j: int
    w_ij: float
    w_ji: float

    @property
    def is_active(self) -> bool:
        return self.w_ij != 0.0 or self.w_ji != 0.0


@dataclass(frozen=True)
class PseudoUndirectedGraph:
    n: int
    edges: tuple[EdgePair, ...]

    @property
    def num_directed_edges(self) -> int:
        """``2m``: every pair contributes two directed edges."""
        return 2 * len(self.edges)

    def weight(self, i: int, j: int) -> float:
        """Weight of the directed edge ``e_ij`` (0 if the pair is absent)."""
        for e in self.edges:
            if (e.i, e.j) == (i, j):
                return e.w_ij
            if (e.i, e.j) == (j, i):
                return e.w_ji
        return 0.0

    def has_pair(self, i: int, j: int) -> bool:
        a, b = min(i, j), max(i, j)
        return any((e.i, e.j) == (a, b) for e in self.edges)

    def with_weight(self, i: int, j: int, value: float) -> "PseudoUndirectedGraph":
        """Return a new graph with ``w_ij`` replaced, re-validated."""
        if not self.has_pair(i, j):
            raise GraphError(f"no edge pair between vertices {i} and {j}")
        rows = []
        for e in self.edges:
            w_ij, w_ji = e.w_ij, e.w_ji
            if (e.i, e.j) == (i, j):
                w_ij = value
            elif (e.i, e.j) == (j, i):
                w_ji = value
            rows.append((e.i, e.j, w_ij, w_ji))
        return build_graph(self.n, rows)

    def scaled(self, c: float) -> "PseudoUndirectedGraph":
        return build_graph(self.n, [(e.i, e.j, c * e.w_ij, c * e.w_ji) for e in self.edges])

    def as_rows(self) -> list[list[float]]:
        return [[e.i, e.j, e.w_ij, e.w_ji] for e in self.edges]


@dataclass(frozen=True)
class IncidenceDecomposition:
    """Incidence matrices of a pseudo-undirected graph split along a spanning tree.

    Column ``k`` of ``E``, ``E_out`` and ``W`` belongs to the directed edge
    ``edges[k] = (tail, head)``.  Columns are laid out as tree edges, their
    reversals, forward chords, reversed chords, so that ``E = E_tau @ R`` with
    ``R = [I | -I | T_tau | -T_tau]``.
    """

    edges: tuple[tuple[int, int], ...]
    E: NDArray[np.float64]
    E_out: NDArray[np.float64]
    E_tau: NDArray[np.float64]
    T_tau: NDArray[np.float64]
    R: NDArray[np.float64]
    W: NDArray[np.float64]
    n_tree: int = field(default=0)
    n_chords: int = field(default=0)

    def edge_index(self, tail: int, head: int) -> int:
        try:
            return self.edges.index((tail, head))
        except ValueError:
            raise GraphError(f"directed edge ({tail}, {head}) not in graph") from None

    @property
    def weights(self) -> NDArray[np.float64]:
        return np.diag(self.W).copy()

    def laplacian(self) -> NDArray[np.float64]:
        return self.E_out @ self.W @ self.E.T


def build_graph(n: int, edge_list: Iterable[Sequence[float]]) -> PseudoUndirectedGraph:
    """Validate ``(i, j, w_ij, w_ji)`` rows and build a graph.

    Rows may be given in either orientation; they are stored with ``i < j``.

    Raises:
        SelfLoopError, DuplicateEdgeError, HalfZeroWeightPairError,
        DisconnectedError: on the corresponding violation.
    """
    n = int(n)
    if n < 2:
        raise GraphError(f"need at least 2 vertices, got {n}")
    pairs: dict[tuple[int, int], EdgePair] = {}
    for row in edge_list:
        if len(row) != 4:
            raise GraphError(f"edge row must be (i, j, w_ij, w_ji), got {row!r}")
        i, j = int(row[0]), int(row[1])
        w_ij, w_ji = float(row[2]), float(row[3])
        if not (1 <= i <= n and 1 <= j <= n):
            raise GraphError(f"vertex out of range 1..{n} in edge ({i}, {j})")
        if i == j:
            raise SelfLoopError(f"self-loop at vertex {i}")
        if not (np.isfinite(w_ij) and np.isfinite(w_ji)):
            raise GraphError(f"non-finite weight on edge ({i}, {j})")
        if i > j:
            i, j, w_ij, w_ji = j, i, w_ji, w_ij
        if (i, j) in pairs:
            raise DuplicateEdgeError(f"edge pair {{{i}, {j}}} listed twice")
        if (w_ij == 0.0) != (w_ji == 0.0):
            raise HalfZeroWeightPairError(
                f"edge pair {{{i}, {j}}} has exactly one zero weight "
                f"(w_{i}{j}={w_ij}, w_{j}{i}={w_ji})"
            )
        pairs[(i, j)] = EdgePair(i, j, w_ij, w_ji)
    if not pairs:
        raise GraphError("edge list is empty")
    g = PseudoUndirectedGraph(n, tuple(pairs[k] for k in sorted(pairs)))
    if not is_connected(g):
        raise DisconnectedError("the unweighted skeleton is not connected")
    return g


def skeleton_neighbors(g: PseudoUndirectedGraph) -> dict[int, list[int]]:
    """Sorted neighbour lists of the skeleton (pairs with nonzero weights)."""
    nbrs: dict[int, list[int]] = {v: [] for v in range(1, g.n + 1)}
    for e in g.edges:
        if e.is_active:
            nbrs[e.i].append(e.j)
            nbrs[e.j].append(e.i)
    for v in nbrs:
        nbrs[v].sort()
    return nbrs


def _bfs_distances(nbrs: dict[int, list[int]], source: int) -> dict[int, int]:
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in nbrs[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def is_connected(g: PseudoUndirectedGraph) -> bool:
    return len(_bfs_distances(skeleton_neighbors(g), 1)) == g.n


def diameter(g: PseudoUndirectedGraph) -> int:
    nbrs = skeleton_neighbors(g)
    return max(max(_bfs_distances(nbrs, v).values()) for v in nbrs)


def laplacian(g: PseudoUndirectedGraph) -> NDArray[np.float64]:
    """Out-Laplacian: ``L[i, j] = -w_ij``, diagonal = sum of outgoing weights."""
    L = np.zeros((g.n, g.n))
    for e in g.edges:
        a, b = e.i - 1, e.j - 1
        L[a, b] = -e.w_ij
        L[b, a] = -e.w_ji
    # assemble the diagonal from the off-diagonal row so that L @ 1 vanishes
    np.fill_diagonal(L, 0.0)
    np.fill_diagonal(L, -L.sum(axis=1))
    return L


def adjacency(g: PseudoUndirectedGraph) -> NDArray[np.float64]:
    A = np.zeros((g.n, g.n))
    for e in g.edges:
        A[e.i - 1, e.j - 1] = e.w_ij
        A[e.j - 1, e.i - 1] = e.w_ji
    return A


def degree_matrix(g: PseudoUndirectedGraph) -> NDArray[np.float64]:
    return np.diag(adjacency(g).sum(axis=1))


def _spanning_tree(g: PseudoUndirectedGraph) -> tuple[list[tuple[int, int]], dict[int, int]]:
    """Depth-first spanning tree from vertex 1, neighbours in ascending order.

    Returns the tree edges oriented parent -> child in discovery order, and
    the parent map.
    """
    nbrs = skeleton_neighbors(g)
    parent = {1: 0}
    tree: list[tuple[int, int]] = []
    stack = [(1, iter(nbrs[1]))]
    while stack:
        u, it = stack[-1]
        for v in it:
            if v not in parent:
                parent[v] = u
                tree.append((u, v))
                stack.append((v, iter(nbrs[v])))
                break
        else:
            stack.pop()
    return tree, parent


def incidence_decomposition(g: PseudoUndirectedGraph) -> IncidenceDecomposition:
    n = g.n
    tree, parent = _spanning_tree(g)
    tree_pairs = {(min(a, b), max(a, b)) for a, b in tree}
    chords = [(e.i, e.j) for e in g.edges if (e.i, e.j) not in tree_pairs]
    edges = tree + [(b, a) for a, b in tree] + chords + [(b, a) for a, b in chords]

    two_m = len(edges)
    E = np.zeros((n, two_m))
    E_out = np.zeros((n, two_m))
    for k, (tail, head) in enumerate(edges):
        E[tail - 1, k] = 1.0
        E[head - 1, k] = -1.0
        E_out[tail - 1, k] = 1.0
    W = np.diag([g.weight(a, b) for a, b in edges])

    n_tree = len(tree)
    E_tau = E[:, :n_tree].copy()

    # chord (a, b): e_a - e_b = sum(path root->b) - sum(path root->a) of tree columns
    tree_col = {child: k for k, (_, child) in enumerate(tree)}

    def path_indicator(v: int) -> NDArray[np.float64]:
        ind = np.zeros(n_tree)
        while parent[v] != 0:
            ind[tree_col[v]] += 1.0
            v = parent[v]
        return ind

    T_tau = np.zeros((n_tree, len(chords)))
    for c, (a, b) in enumerate(chords):
        T_tau[:, c] = path_indicator(b) - path_indicator(a)

    eye = np.eye(n_tree)
    R = np.hstack([eye, -eye, T_tau, -T_tau])
    return IncidenceDecomposition(
        edges=tuple(edges),
        E=E,
        E_out=E_out,
        E_tau=E_tau,
        T_tau=T_tau,
        R=R,
        W=W,
        n_tree=n_tree,
        n_chords=len(chords),
    )


def cycle_graph(forward: Sequence[float], backward: Sequence[float] | None = None) -> PseudoUndirectedGraph:
    """Cycle ``1-2-...-n-1``.

    ``forward[k]`` is ``w_{k+1, k+2}`` (wrapping to ``w_{n,1}``) and
    ``backward[k]`` is ``w_{k+2, k+1}`` (wrapping to ``w_{1,n}``).
    """
    n = len(forward)
    if n < 3:
        raise GraphError("a cycle needs at least 3 vertices")
    if backward is None:
        backward = forward
    if len(backward) != n:
        raise GraphError("forward and backward weight lists differ in length")
    rows = []
    for k in range(n):
        a, b = k + 1, (k + 1) % n + 1
        rows.append((a, b, forward[k], backward[k]))
    return build_graph(n, rows)


def star_graph(hub_out: Sequence[float], spoke_out: Sequence[float] | None = None) -> PseudoUndirectedGraph:
    """Star with hub 1: ``hub_out[k] = w_{1, k+2}``, ``spoke_out[k] = w_{k+2, 1}``."""
    if spoke_out is None:
        spoke_out = hub_out
    if len(hub_out) != len(spoke_out):
        raise GraphError("hub and spoke weight lists differ in length")
    n = len(hub_out) + 1
    return build_graph(n, [(1, k + 2, hub_out[k], spoke_out[k]) for k in range(n - 1)])


def cycle_weights(g: PseudoUndirectedGraph) -> tuple[list[float], list[float]] | None:
    """``(forward, backward)`` if ``g`` is exactly the cycle ``1-2-...-n-1``, else ``None``."""
    n = g.n
    if n < 3 or len(g.edges) != n:
        return None
    pairs = [(k + 1, k % n + 2) if k < n - 1 else (n, 1) for k in range(n)]
    if not all(g.has_pair(a, b) for a, b in pairs):
        return None
    return [g.weight(a, b) for a, b in pairs], [g.weight(b, a) for a, b in pairs]


def star_weights(g: PseudoUndirectedGraph) -> tuple[list[float], list[float]] | None:
    """``(hub_out, spoke_out)`` if ``g`` is the star with hub 1, else ``None``."""
    n = g.n
    if n < 2 or len(g.edges) != n - 1:
        return None
    if not all(g.has_pair(1, k) for k in range(2, n + 1)):
        return None
    return [g.weight(1, k) for k in range(2, n + 1)], [g.weight(k, 1) for k in range(2, n + 1)]
