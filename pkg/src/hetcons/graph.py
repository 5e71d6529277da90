"""Weighted digraphs, Laplacians, reachability and the diagonal dominance scaling.

Node indices are 1-based throughout the public API. An edge ``(i, j, w)``
starts at node ``i`` and ends at node ``j``; it puts ``a_ij = w`` into row
``i`` of the adjacency matrix, so node ``i`` listens to node ``j``. A node is
*reachable* when every other node has a directed path to it.
"""

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import GraphError, ValidationError
from .numeric import DEFAULT_POLICY


@dataclass(frozen=True)
class Digraph:
    n: int
    edges: tuple = ()

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ValidationError(f"node count must be a positive integer, got {self.n!r}")
        clean = []
        seen = set()
        for k, edge in enumerate(self.edges):
            if len(edge) != 3:
                raise ValidationError(f"edges[{k}]: expected (from, to, weight)")
            i, j, w = int(edge[0]), int(edge[1]), float(edge[2])
            if not (1 <= i <= self.n and 1 <= j <= self.n):
                raise ValidationError(f"edges[{k}]: node index out of range 1..{self.n}")
            if i == j:
                raise ValidationError(f"edges[{k}]: self-edge at node {i}")
            if not np.isfinite(w) or w < 0:
                raise ValidationError(f"edges[{k}]: weight must be finite and nonnegative")
            if (i, j) in seen:
                raise ValidationError(f"edges[{k}]: duplicate edge ({i}, {j})")
            seen.add((i, j))
            clean.append((i, j, w))
        object.__setattr__(self, "edges", tuple(clean))

    @classmethod
    def from_adjacency(cls, adjacency):
        adj = np.asarray(adjacency, dtype=float)
        n = adj.shape[0]
        if adj.shape != (n, n):
            raise ValidationError("adjacency must be square")
        edges = [(i + 1, j + 1, adj[i, j]) for i in range(n) for j in range(n)
                 if i != j and adj[i, j] != 0]
        if np.any(np.diag(adj) != 0):
            raise ValidationError("self-edges are not allowed")
        return cls(n, tuple(edges))

    @classmethod
    def chain(cls, n, weight=1.0):
        """Directed chain ``i+1 -> i``; node 1 is the unique reachable node."""
        return cls(n, tuple((i + 1, i, weight) for i in range(1, n)))

    def neighbors(self, i):
        """Nodes ``j`` with an edge ``(i, j)`` of positive weight."""
        return tuple(j for (a, j, w) in self.edges if a == i and w > 0)


@dataclass(frozen=True)
class GraphMatrices:
    adjacency: np.ndarray
    degree: np.ndarray
    laplacian: np.ndarray


@dataclass(frozen=True)
class DominanceScaling:
    """Certificate that ``M_D + M_D'`` has minimum eigenvalue ``>= 2 + margin``."""

    d: np.ndarray
    i_R: int
    margin: float
    lambda_min: float

    @property
    def d_max(self):
        return float(np.max(self.d))


def build_matrices(g):
    n = g.n
    adj = np.zeros((n, n))
    for i, j, w in g.edges:
        adj[i - 1, j - 1] = w
    deg = np.diag(adj.sum(axis=1))
    return GraphMatrices(adjacency=adj, degree=deg, laplacian=deg - adj)


def reachable_nodes(g):
    """All nodes that every other node can reach along edge direction."""
    preds = {k: [] for k in range(1, g.n + 1)}
    for i, j, w in g.edges:
        if w > 0:
            preds[j].append(i)
    result = set()
    for k in range(1, g.n + 1):
        seen = {k}
        queue = deque([k])
        while queue:
            for i in preds[queue.popleft()]:
                if i not in seen:
                    seen.add(i)
                    queue.append(i)
        if len(seen) == g.n:
            result.add(k)
    return frozenset(result)


def default_root(g):
    """Smallest-index reachable node, or ``None`` for a disconnected graph."""
    nodes = reachable_nodes(g)
    return min(nodes) if nodes else None


def pinned_laplacian(L, i_R):
    """``L + e_iR e_iR'`` (the unscaled interconnection)."""
    L = np.asarray(L, dtype=float)
    _check_root(L, i_R)
    M = L.copy()
    M[i_R - 1, i_R - 1] += 1.0
    return M


def numerical_rank(M, rtol=DEFAULT_POLICY.rank_rtol):
    s = np.linalg.svd(np.atleast_2d(M), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > max(M.shape) * s[0] * rtol))


def check_rank_condition(L, i_R, policy=DEFAULT_POLICY):
    M = pinned_laplacian(L, i_R)
    return numerical_rank(M, policy.rank_rtol) == M.shape[0]


def find_dominance_scaling(L, i_R, margin=None, policy=DEFAULT_POLICY):
    """Constructive diagonal scaling ``D`` with ``M_D + M_D' >= (2 + margin) I``.

    Solves ``M' d0 = 1`` for the M-matrix ``M = L + e_iR e_iR'``. Every column
    of ``diag(d0) M`` then sums to one, so it is strictly column dominant and
    (being a scaled Laplacian plus a pin) weakly row dominant; its symmetric
    part is therefore positive definite and a scalar rescaling of ``d0``
    reaches the requested bound.
    """
    margin = policy.margin if margin is None else float(margin)
    if margin <= 0:
        raise ValidationError("margin must be positive")
    M = pinned_laplacian(L, i_R)
    n = M.shape[0]
    if not check_rank_condition(L, i_R, policy):
        raise GraphError(f"graph not connected for i_R={i_R}: rank condition fails")
    try:
        d0 = np.linalg.solve(M.T, np.ones(n))
    except np.linalg.LinAlgError as exc:
        raise GraphError(f"graph not connected for i_R={i_R}: {exc}") from None
    if np.any(d0 <= policy.positivity_tol):
        raise GraphError(f"graph not connected for i_R={i_R}: scaling not positive")
    MD0 = d0[:, None] * M
    lam0 = float(np.linalg.eigvalsh(MD0 + MD0.T)[0])
    if lam0 <= 0:
        raise GraphError(f"graph not connected for i_R={i_R}: symmetric part not definite")
    d = d0 * (2.0 + margin) / lam0
    MD = d[:, None] * M
    lam = float(np.linalg.eigvalsh(MD + MD.T)[0])
    return DominanceScaling(d=d, i_R=int(i_R), margin=margin, lambda_min=lam)


def expand_blocks(M, block_dims):
    """Replace each scalar ``mu_ij`` with ``mu_ij * I_q``.

    Off-diagonal coupling between blocks of different size is rejected since
    the relative signals it would compare have different dimensions.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    dims = [int(q) for q in block_dims]
    if len(dims) != n:
        raise ValidationError(f"block_dims has length {len(dims)}, expected {n}")
    if any(q < 1 for q in dims):
        raise ValidationError("block dimensions must be positive")
    offs = np.concatenate([[0], np.cumsum(dims)])
    out = np.zeros((offs[-1], offs[-1]))
    for i in range(n):
        for j in range(n):
            if M[i, j] == 0:
                continue
            if dims[i] != dims[j]:
                raise ValidationError(
                    f"agents {i + 1} and {j + 1} are coupled but have block sizes "
                    f"{dims[i]} and {dims[j]}")
            out[offs[i]:offs[i + 1], offs[j]:offs[j + 1]] = M[i, j] * np.eye(dims[i])
    return out


def build_interconnection(scaling, L, block_dims=None):
    """``M_D = D (L + e_iR e_iR')``, optionally block-expanded.

    The unscaled counterpart (``D = I``) is :func:`pinned_laplacian`.
    """
    L = np.asarray(L, dtype=float)
    if scaling.d.shape != (L.shape[0],):
        raise ValidationError(
            f"scaling has {scaling.d.shape[0]} entries, Laplacian is {L.shape[0]}x{L.shape[0]}")
    MD = scaling.d[:, None] * pinned_laplacian(L, scaling.i_R)
    return MD if block_dims is None else expand_blocks(MD, block_dims)


def _check_root(L, i_R):
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise ValidationError("Laplacian must be square")
    if not 1 <= int(i_R) <= L.shape[0]:
        raise ValidationError(f"i_R={i_R} out of range 1..{L.shape[0]}")
