"""Shared builders for the test suite."""

import numpy as np
import pytest

from auxgrid.controllers import ControlParams
from auxgrid.graph import Topology, is_connected


@pytest.fixture
def ring4() -> Topology:
    """Four nodes on a ring with node 1 pinned: the benchmark topology."""
    return Topology.from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)],
                               pinning=[1.0, 0.0, 0.0, 0.0])


@pytest.fixture
def ring4_params() -> ControlParams:
    return ControlParams(beta=2.0, omega_ref=314.0,
                         droop=np.array([2e-3, 2e-3, 3e-3, 3e-3]))


def random_connected_topology(rng: np.random.Generator, n: int,
                              pinned: bool = True) -> Topology:
    """Rejection-sample an Erdos-Renyi graph until connected."""
    while True:
        adj = np.triu(rng.random((n, n)) < 0.5, k=1).astype(int)
        adj = adj + adj.T
        pinning = np.zeros(n)
        if pinned:
            count = int(rng.integers(1, n + 1))
            pinning[rng.choice(n, size=count, replace=False)] = 1.0
        top = Topology(n=n, adjacency=adj, pinning=pinning)
        if is_connected(top):
            return top


def naive_rk4(f, x0: np.ndarray, t0: float, t1: float, h: float) -> np.ndarray:
    """Reference fixed-step integrator used as an independent oracle."""
    steps = int(round((t1 - t0) / h))
    x = np.array(x0, dtype=float)
    t = t0
    for _ in range(steps):
        k1 = f(t, x)
        k2 = f(t + 0.5 * h, x + 0.5 * h * k1)
        k3 = f(t + 0.5 * h, x + 0.5 * h * k2)
        k4 = f(t + h, x + h * k3)
        x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
    return x
