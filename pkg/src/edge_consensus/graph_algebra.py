"""Incidence, Laplacian and edge-Laplacian algebra of undirected weighted graphs.

Node indices are 1-based at the interface (as in the JSON format) and 0-based
inside every matrix.  Each edge ``(i, j)`` with ``i < j`` is oriented so that
its incidence column holds ``+sqrt(a_ij)`` at node ``i`` and ``-sqrt(a_ij)`` at
node ``j``; with this convention ``L = E E^T`` is the weighted Laplacian.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import DisconnectedGraph, InvalidGraph

#: spectral-gap threshold below which a graph is reported as disconnected
CONNECTIVITY_TOL = 1e-9


def _frozen(a):
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


def sign_normalize(vectors, tol=1e-12):
    """Flip columns so the first component with ``|v| > tol`` is positive."""
    v = np.array(vectors, dtype=float, copy=True)
    if v.ndim == 1:
        return sign_normalize(v[:, None], tol)[:, 0]
    for k in range(v.shape[1]):
        nz = np.flatnonzero(np.abs(v[:, k]) > tol)
        if nz.size and v[nz[0], k] < 0:
            v[:, k] = -v[:, k]
    return v


@dataclass(frozen=True)
class Graph:
    node_count: int
    edges: tuple[tuple[int, int], ...]
    weights: tuple[float, ...]

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def to_dict(self) -> dict:
        return {
            "nodes": self.node_count,
            "edges": [[i, j, w] for (i, j), w in zip(self.edges, self.weights)],
        }


@dataclass(frozen=True)
class GraphMatrices:
    incidence: np.ndarray
    laplacian: np.ndarray
    edge_laplacian: np.ndarray
    pseudoinverse: np.ndarray
    lbar: np.ndarray
    connected: bool

    @property
    def node_count(self) -> int:
        return self.incidence.shape[0]

    @property
    def edge_count(self) -> int:
        return self.incidence.shape[1]


@dataclass(frozen=True)
class LaplacianSpectrum:
    eigenvalues: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    gamma: np.ndarray

    @property
    def lambda_min(self) -> float:
        """Smallest nonzero Laplacian eigenvalue (algebraic connectivity)."""
        return float(self.eigenvalues[1])

    @property
    def nonzero(self) -> np.ndarray:
        return self.eigenvalues[1:]

    def laplacian(self) -> np.ndarray:
        """Reassemble ``L = V2 Gamma V2^T`` from the decomposition."""
        return self.v2 @ self.gamma @ self.v2.T


def build_graph(node_count: int, edge_list: Iterable[Sequence[int]],
                weights: Sequence[float] | None = None) -> Graph:
    """Validate and canonicalize an undirected weighted graph.

    Parameters
    ----------
    node_count : int
        Number of agents ``N`` (at least 2).
    edge_list : iterable of pairs
        1-based endpoints.  Order within a pair is irrelevant.
    weights : sequence of float, optional
        Positive edge weights ``a_ij``; all ones when omitted.

    Returns
    -------
    Graph
        Endpoints ordered ``i < j`` and edges sorted lexicographically.
    """
    if isinstance(node_count, bool) or int(node_count) != node_count:
        raise InvalidGraph(f"node count must be an integer, got {node_count!r}")
    n = int(node_count)
    if n < 2:
        raise InvalidGraph(f"need at least 2 nodes, got {n}")
    pairs = [tuple(e) for e in edge_list]
    if weights is None:
        weights = [1.0] * len(pairs)
    if len(weights) != len(pairs):
        raise InvalidGraph(f"{len(pairs)} edges but {len(weights)} weights")

    canon = {}
    for pair, w in zip(pairs, weights):
        if len(pair) != 2:
            raise InvalidGraph(f"edge {pair!r} must have two endpoints")
        i, j = (int(p) for p in pair)
        if i == j:
            raise InvalidGraph(f"self-loop at node {i}")
        for p in (i, j):
            if not 1 <= p <= n:
                raise InvalidGraph(f"endpoint {p} outside [1, {n}]")
        w = float(w)
        if not np.isfinite(w) or w <= 0:
            raise InvalidGraph(f"weight of edge ({i}, {j}) must be positive, got {w}")
        key = (min(i, j), max(i, j))
        if key in canon:
            raise InvalidGraph(f"duplicate edge {key}")
        canon[key] = w

    keys = sorted(canon)
    return Graph(n, tuple(keys), tuple(canon[k] for k in keys))


def graph_from_dict(doc: Mapping) -> Graph:
    """Read ``{"nodes": N, "edges": [[i, j, weight?], ...]}``."""
    try:
        nodes = doc["nodes"]
        raw = doc["edges"]
    except (KeyError, TypeError) as exc:
        raise InvalidGraph(f"graph document needs 'nodes' and 'edges': {exc}") from None
    edges, weights = [], []
    for e in raw:
        if len(e) not in (2, 3):
            raise InvalidGraph(f"edge entry {e!r} must be [i, j] or [i, j, weight]")
        edges.append(e[:2])
        weights.append(e[2] if len(e) == 3 else 1.0)
    return build_graph(nodes, edges, weights)


def path_graph(node_count: int) -> Graph:
    return build_graph(node_count, [(k, k + 1) for k in range(1, node_count)])


def is_connected(graph: Graph) -> bool:
    n = graph.node_count
    if graph.edge_count == 0:
        return n == 1
    rows = [i - 1 for i, _ in graph.edges]
    cols = [j - 1 for _, j in graph.edges]
    adj = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    ncomp, _ = connected_components(adj, directed=False)
    return ncomp == 1


def incidence_matrix(graph: Graph) -> np.ndarray:
    e = np.zeros((graph.node_count, graph.edge_count))
    for k, ((i, j), w) in enumerate(zip(graph.edges, graph.weights)):
        s = np.sqrt(w)
        e[i - 1, k] = s
        e[j - 1, k] = -s
    return e


def laplacian_pinv(laplacian: np.ndarray, tol: float = CONNECTIVITY_TOL) -> np.ndarray:
    """Moore-Penrose inverse of a symmetric PSD matrix by eigendecomposition."""
    w, v = np.linalg.eigh(laplacian)
    cutoff = tol * max(1.0, float(np.max(np.abs(w))))
    inv = np.zeros_like(w)
    keep = w > cutoff
    inv[keep] = 1.0 / w[keep]
    p = (v * inv) @ v.T
    return 0.5 * (p + p.T)


def compute_matrices(graph: Graph) -> GraphMatrices:
    e = incidence_matrix(graph)
    lap = e @ e.T
    le = e.T @ e
    pinv = laplacian_pinv(lap)
    lbar = e.T @ pinv @ e
    lbar = 0.5 * (lbar + lbar.T)
    return GraphMatrices(
        incidence=_frozen(e),
        laplacian=_frozen(lap),
        edge_laplacian=_frozen(le),
        pseudoinverse=_frozen(pinv),
        lbar=_frozen(lbar),
        connected=is_connected(graph),
    )


def spectrum(matrices: GraphMatrices) -> LaplacianSpectrum:
    """Block-diagonalize ``L`` with an orthogonal ``V = [V1 V2]``.

    ``V1`` is fixed to ``1/sqrt(N)`` and the columns of ``V2`` are the
    remaining eigenvectors, sign-normalized for reproducibility.

    Raises
    ------
    DisconnectedGraph
        If the second-smallest eigenvalue is below ``CONNECTIVITY_TOL``.
    """
    lap = np.asarray(matrices.laplacian)
    n = lap.shape[0]
    w, v = np.linalg.eigh(lap)
    if w[1] < CONNECTIVITY_TOL:
        raise DisconnectedGraph(
            f"graph not connected (second Laplacian eigenvalue {w[1]:.3e})")
    v2 = sign_normalize(v[:, 1:])
    eigenvalues = np.concatenate([[0.0], w[1:]])
    return LaplacianSpectrum(
        eigenvalues=_frozen(eigenvalues),
        v1=_frozen(np.full(n, 1.0 / np.sqrt(n))),
        v2=_frozen(v2),
        gamma=_frozen(np.diag(w[1:])),
    )
