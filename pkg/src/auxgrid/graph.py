"""Communication topology and its spectral/connectivity queries."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import linalg
from .exceptions import ConfigurationError, EdgeNotFoundError, ShapeError


@dataclass(frozen=True, eq=False)
class Topology:
    """Undirected unweighted graph with per-node pinning gains.

    The adjacency matrix must be symmetric 0/1 with a zero diagonal;
    pinning gains are nonnegative reals (nonzero entries mark leaders).
    Instances are immutable; mutating operations return new objects.
    """

    n: int
    adjacency: np.ndarray
    pinning: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.n < 1:
            raise ShapeError(f"need at least one node, got n={self.n}")
        adj = np.asarray(self.adjacency, dtype=int)
        if adj.shape != (self.n, self.n):
            raise ShapeError(f"adjacency shape {adj.shape} does not match n={self.n}")
        if not np.array_equal(adj, adj.T):
            raise ShapeError("adjacency must be symmetric (undirected graph)")
        if np.any(np.diag(adj) != 0):
            raise ShapeError("adjacency diagonal must be zero")
        if not np.all((adj == 0) | (adj == 1)):
            raise ShapeError("edge weights must be 0 or 1")
        pin = self.pinning
        pin = np.zeros(self.n) if pin is None else np.asarray(pin, dtype=float)
        if pin.shape != (self.n,):
            raise ShapeError(f"pinning shape {pin.shape} does not match n={self.n}")
        if not np.all(np.isfinite(pin)) or np.any(pin < 0):
            raise ShapeError("pinning gains must be finite and nonnegative")
        adj = adj.copy()
        pin = pin.copy()
        adj.setflags(write=False)
        pin.setflags(write=False)
        object.__setattr__(self, "adjacency", adj)
        object.__setattr__(self, "pinning", pin)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Topology)
            and self.n == other.n
            and np.array_equal(self.adjacency, other.adjacency)
            and np.array_equal(self.pinning, other.pinning)
        )

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]],
                   pinning: Sequence[float] | None = None) -> "Topology":
        adj = np.zeros((n, n), dtype=int)
        for i, j in edges:
            if not (0 <= i < n and 0 <= j < n) or i == j:
                raise ShapeError(f"invalid edge ({i}, {j}) for n={n}")
            adj[i, j] = 1
            adj[j, i] = 1
        return cls(n=n, adjacency=adj, pinning=pinning)

    def has_edge(self, i: int, j: int) -> bool:
        return 0 <= i < self.n and 0 <= j < self.n and self.adjacency[i, j] == 1

    def edges(self) -> list[tuple[int, int]]:
        """Undirected edges as sorted (i, j) pairs with i < j."""
        return [(i, j) for i in range(self.n) for j in range(i + 1, self.n)
                if self.adjacency[i, j] == 1]

    def num_leaders(self) -> int:
        return int(np.count_nonzero(self.pinning > 0))


def laplacian(top: Topology) -> np.ndarray:
    """Graph Laplacian: degree on the diagonal, -1 per edge off it.

    Built in integer arithmetic so row sums are exactly zero.
    """
    adj = top.adjacency
    lap = np.diag(adj.sum(axis=1)) - adj
    return lap.astype(float)


def pinned_matrix(top: Topology) -> np.ndarray:
    """The negative pinned Laplacian -(L + G).

    Symmetric, and negative definite when the graph is connected and at
    least one pinning gain is positive.
    """
    return -(laplacian(top) + np.diag(top.pinning))


def is_connected(top: Topology) -> bool:
    """Breadth-first search from node 0 reaches every node."""
    seen = np.zeros(top.n, dtype=bool)
    seen[0] = True
    frontier = [0]
    while frontier:
        nxt = []
        for i in frontier:
            for j in np.flatnonzero(top.adjacency[i]):
                if not seen[j]:
                    seen[j] = True
                    nxt.append(int(j))
        frontier = nxt
    return bool(seen.all())


def fiedler_value(top: Topology) -> float:
    """Second-smallest Laplacian eigenvalue; positive iff connected (n >= 2)."""
    if top.n < 2:
        raise ConfigurationError("algebraic connectivity needs at least 2 nodes")
    return float(linalg.sym_eigen(laplacian(top)).values[1])


def remove_edge(top: Topology, i: int, j: int) -> Topology:
    """New topology without edge (i, j); the original is unchanged."""
    if not top.has_edge(i, j):
        raise EdgeNotFoundError(f"edge ({i}, {j}) not present")
    adj = top.adjacency.copy()
    adj[i, j] = 0
    adj[j, i] = 0
    return Topology(n=top.n, adjacency=adj, pinning=top.pinning)
