"""Communication graphs, weighted Laplacians and consensus projectors.

Stacked vectors are stored as 2-D arrays of shape ``(N, d)``: row ``i`` is
agent ``i``'s block. A flat vector of length ``N*d`` is accepted anywhere a
stacked vector is expected and is returned in the same layout. The flat
ordering is agent-major, so ``(L kron I_d) v`` equals ``(L @ V).ravel()``.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConnectivityError, DomainError

TOPOLOGIES = ("star", "ring", "path", "complete", "edge_list")


@dataclass(frozen=True)
class CommGraph:
    """Undirected, connected, weighted graph on nodes ``0..N-1``.

    Edges are stored as sorted pairs ``(i, j)`` with ``i < j``.
    """

    n_nodes: int
    edges: tuple
    weights: tuple

    def adjacency(self):
        W = np.zeros((self.n_nodes, self.n_nodes))
        for (i, j), w in zip(self.edges, self.weights):
            W[i, j] = W[j, i] = w
        return W

    def degrees(self):
        """Weighted degrees ``d_i``."""
        return self.adjacency().sum(axis=1)

    @property
    def max_degree(self):
        return float(self.degrees().max())

    def neighbors(self, i):
        out = [j for a, j in self.edges if a == i]
        out += [a for a, j in self.edges if j == i]
        return sorted(out)


def _is_connected(n_nodes, edges):
    adj = [[] for _ in range(n_nodes)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = {0}
    stack = [0]
    while stack:
        for j in adj[stack.pop()]:
            if j not in seen:
                seen.add(j)
                stack.append(j)
    return len(seen) == n_nodes


def build_graph(topology, n_nodes, edges=None, weights=None):
    """Build a communication graph.

    Parameters
    ----------
    topology : {"star", "ring", "path", "complete", "edge_list"}
        Graph family. The star hub is node 0.
    n_nodes : int
        Number of agents, at least 2.
    edges : iterable of (int, int), optional
        0-based node pairs; required for ``"edge_list"``.
    weights : float or sequence of float, optional
        Positive edge weights, aligned with the generated edge order.
        Defaults to 1 on every edge.

    Returns
    -------
    CommGraph
    """
    n_nodes = int(n_nodes)
    if n_nodes < 2:
        raise DomainError(f"need at least 2 nodes, got {n_nodes}")
    if topology == "star":
        pairs = [(0, j) for j in range(1, n_nodes)]
    elif topology == "ring":
        if n_nodes == 2:
            pairs = [(0, 1)]
        else:
            pairs = [(i, (i + 1) % n_nodes) for i in range(n_nodes)]
    elif topology == "path":
        pairs = [(i, i + 1) for i in range(n_nodes - 1)]
    elif topology == "complete":
        pairs = [(i, j) for i in range(n_nodes) for j in range(i + 1, n_nodes)]
    elif topology == "edge_list":
        if edges is None:
            raise DomainError("edge_list topology requires edges")
        pairs = [tuple(int(v) for v in e) for e in edges]
    else:
        raise DomainError(f"unknown topology {topology!r}; expected one of {TOPOLOGIES}")

    norm = []
    for i, j in pairs:
        if i == j:
            raise DomainError(f"self-loop at node {i}")
        if not (0 <= i < n_nodes and 0 <= j < n_nodes):
            raise DomainError(f"edge ({i}, {j}) out of range for {n_nodes} nodes")
        norm.append((min(i, j), max(i, j)))
    if len(set(norm)) != len(norm):
        raise DomainError("duplicate edges")

    if weights is None:
        w = [1.0] * len(norm)
    elif np.isscalar(weights):
        w = [float(weights)] * len(norm)
    else:
        w = [float(v) for v in weights]
        if len(w) != len(norm):
            raise DomainError(f"{len(w)} weights for {len(norm)} edges")
    if any(not np.isfinite(v) or v <= 0 for v in w):
        raise DomainError("edge weights must be positive and finite")

    if not _is_connected(n_nodes, norm):
        raise ConnectivityError("communication graph is not connected")
    return CommGraph(n_nodes, tuple(norm), tuple(w))


def _as_blocks(v, n_blocks, block_dim=None):
    arr = np.asarray(v, dtype=float)
    if arr.ndim == 1:
        if block_dim is None:
            if arr.size % n_blocks:
                raise DomainError(f"length {arr.size} not divisible into {n_blocks} blocks")
            block_dim = arr.size // n_blocks
        if arr.size != n_blocks * block_dim:
            raise DomainError(f"expected {n_blocks * block_dim} entries, got {arr.size}")
        return arr.reshape(n_blocks, block_dim), True
    if arr.ndim != 2 or arr.shape[0] != n_blocks:
        raise DomainError(f"expected {n_blocks} blocks, got shape {arr.shape}")
    if block_dim is not None and arr.shape[1] != block_dim:
        raise DomainError(f"expected block dimension {block_dim}, got {arr.shape[1]}")
    return arr, False


@dataclass(frozen=True)
class LaplacianOps:
    """Weighted Laplacian ``L = Deg - W`` with cached extreme eigenvalues."""

    matrix: np.ndarray = field(repr=False)
    block_dim: int
    lambda2: float
    lambda_max: float
    degrees: np.ndarray = field(repr=False)

    @property
    def n_nodes(self):
        return self.matrix.shape[0]

    def apply(self, v):
        """Return ``(L kron I) v`` without forming the Kronecker product."""
        blocks, flat = _as_blocks(v, self.n_nodes)
        out = self.matrix @ blocks
        return out.ravel() if flat else out

    def kron(self, block_dim=None):
        """Dense ``L kron I_d`` (verification only)."""
        d = self.block_dim if block_dim is None else block_dim
        return np.kron(self.matrix, np.eye(d))


def laplacian(graph, block_dim=1):
    """Laplacian operators of ``graph`` for blocks of dimension ``block_dim``."""
    W = graph.adjacency()
    deg = W.sum(axis=1)
    L = np.diag(deg) - W
    ev = np.linalg.eigvalsh(L)
    return LaplacianOps(L, int(block_dim), float(ev[1]), float(ev[-1]), deg)


def laplacian_apply(lap, v):
    return lap.apply(v)


def aggregate(v, n_blocks):
    """Block average ``sigma(v)``."""
    blocks, _ = _as_blocks(v, n_blocks)
    return blocks.mean(axis=0)


def project_parallel(v, n_blocks):
    """Projection onto the consensus subspace: ``1_N kron sigma(v)``."""
    blocks, flat = _as_blocks(v, n_blocks)
    out = np.broadcast_to(blocks.mean(axis=0), blocks.shape).copy()
    return out.ravel() if flat else out


def project_perp(v, n_blocks):
    """Projection onto the orthogonal complement of the consensus subspace."""
    blocks, flat = _as_blocks(v, n_blocks)
    out = blocks - blocks.mean(axis=0)
    return out.ravel() if flat else out


def perp_projector_matrix(n_blocks, block_dim):
    """Dense ``P_perp`` of size ``N*d`` (verification and metric assembly)."""
    P_par = np.kron(np.full((n_blocks, n_blocks), 1.0 / n_blocks), np.eye(block_dim))
    return np.eye(n_blocks * block_dim) - P_par
