"""Network topology, Metropolis mixing weights, and additive consensus.

Agents approximate the network-wide sums of their local increments by L
synchronous rounds of neighbor averaging with the Metropolis rule

    W[i][j] = 1 / (1 + max(deg_i, deg_j))   for edges {i, j},
    W[i][i] = 1 - sum_{j != i} W[i][j],

which is symmetric, doubly stochastic, and needs only local degrees. The
rounds drive every agent to the network average; a final scale by K converts
the average fixed point into the sum. On a complete graph one round is exact.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Topology",
    "ConsensusConfig",
    "build_topology",
    "metropolis_weights",
    "consensus_sum",
]

TOPOLOGY_KINDS = ("ring", "complete", "grid", "custom")


@dataclass(frozen=True)
class Topology:
    """Undirected connected communication graph over K agents."""

    num_agents: int
    adjacency: np.ndarray = field(repr=False)

    def __post_init__(self):
        A = np.asarray(self.adjacency, dtype=bool)
        K = self.num_agents
        if K < 1:
            raise ValueError(f"num_agents must be >= 1, got {K}")
        if A.shape != (K, K):
            raise ValueError(f"adjacency shape {A.shape} does not match K={K}")
        if not np.array_equal(A, A.T):
            raise ValueError("adjacency must be symmetric")
        if np.any(np.diag(A)):
            raise ValueError("adjacency must have a zero diagonal")
        if not _is_connected(A):
            raise ValueError("topology is not connected")
        A.setflags(write=False)
        object.__setattr__(self, "adjacency", A)

    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)


@dataclass(frozen=True)
class ConsensusConfig:
    """Number of synchronous rounds L and the mixing-weight rule."""

    rounds: int = 1
    weight_rule: str = "metropolis"

    def __post_init__(self):
        if self.rounds < 0:
            raise ValueError(f"rounds must be >= 0, got {self.rounds}")
        if self.weight_rule != "metropolis":
            raise ValueError(f"unknown weight rule {self.weight_rule!r}")


def _is_connected(A: np.ndarray) -> bool:
    K = A.shape[0]
    seen = np.zeros(K, dtype=bool)
    queue = deque([0])
    seen[0] = True
    while queue:
        i = queue.popleft()
        for j in np.flatnonzero(A[i]):
            if not seen[j]:
                seen[j] = True
                queue.append(j)
    return bool(seen.all())


def build_topology(
    kind: str, K: int, custom_edges: Iterable[tuple[int, int]] | None = None
) -> Topology:
    """Construct a named topology: ring, complete, grid, or custom edge list.

    A ring needs K >= 3 for a proper cycle; K <= 2 degenerates to complete.
    The grid is a near-square 4-neighbor lattice. Custom graphs must be
    connected.
    """
    if kind not in TOPOLOGY_KINDS:
        raise ValueError(f"unknown topology kind {kind!r}")
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    A = np.zeros((K, K), dtype=bool)
    if kind == "complete" or (kind == "ring" and K <= 2):
        A[:] = True
        np.fill_diagonal(A, False)
    elif kind == "ring":
        for i in range(K):
            j = (i + 1) % K
            A[i, j] = A[j, i] = True
    elif kind == "grid":
        rows = _near_square_rows(K)
        cols = (K + rows - 1) // rows
        for i in range(K):
            r, c = divmod(i, cols)
            for dr, dc in ((0, 1), (1, 0)):
                rr, cc = r + dr, c + dc
                j = rr * cols + cc
                if rr < rows and cc < cols and j < K:
                    A[i, j] = A[j, i] = True
    else:  # custom
        if custom_edges is None:
            raise ValueError("custom topology requires an edge list")
        for i, j in custom_edges:
            if not (0 <= i < K and 0 <= j < K) or i == j:
                raise ValueError(f"invalid edge ({i}, {j}) for K={K}")
            A[i, j] = A[j, i] = True
    return Topology(num_agents=K, adjacency=A)


def _near_square_rows(K: int) -> int:
    r = int(np.floor(np.sqrt(K)))
    while r > 1 and K % r != 0:
        r -= 1
    return max(r, 1)


def metropolis_weights(topo: Topology) -> np.ndarray:
    """Symmetric doubly stochastic mixing matrix from local degrees only."""
    A = topo.adjacency
    deg = topo.degrees()
    K = topo.num_agents
    W = np.zeros((K, K))
    for i in range(K):
        for j in np.flatnonzero(A[i]):
            W[i, j] = 1.0 / (1.0 + max(deg[i], deg[j]))
        W[i, i] = 1.0 - W[i].sum()
    return W


def consensus_sum(
    values: Sequence[np.ndarray], topo: Topology, cfg: ConsensusConfig
) -> list[np.ndarray]:
    """L synchronous mixing rounds, then scale by K to approximate the sum.

    Every agent contributes one tensor; all must share a shape. After L
    rounds of v_k <- sum_j W[k][j] v_j elementwise, each agent holds an
    approximation of the network average, so K times it approximates the
    network sum. L=0 returns K times each local value unchanged.
    """
    K = topo.num_agents
    if len(values) != K:
        raise ValueError(f"expected {K} per-agent tensors, got {len(values)}")
    arrays = [np.asarray(v, dtype=float) for v in values]
    shape = arrays[0].shape
    if any(a.shape != shape for a in arrays):
        raise ValueError("per-agent tensors must all share one shape")
    V = np.stack([a.ravel() for a in arrays], axis=0)  # K x numel
    W = metropolis_weights(topo)
    for _ in range(cfg.rounds):
        V = W @ V
    V *= K
    return [V[k].reshape(shape) for k in range(K)]
