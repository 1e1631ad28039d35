"""Closed-loop frequency and power controller assembly plus analytic bounds.

The frequency controller is a leader-follower consensus system coupled
to a hidden auxiliary layer through the gain beta; the power controller
is its leaderless counterpart acting on droop-scaled power. Both are
linear, and their resilience to bounded injections is characterized by
closed-form steady-state error bounds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import graph, linalg
from .exceptions import ConfigurationError, ShapeError, SingularMatrixError


@dataclass(frozen=True, eq=False)
class ControlParams:
    """Controller gains: coupling gain beta, reference frequency, droop."""

    beta: float
    omega_ref: float
    droop: np.ndarray

    def __post_init__(self):
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise ConfigurationError(f"beta must be positive, got {self.beta}")
        if not (np.isfinite(self.omega_ref) and self.omega_ref > 0):
            raise ConfigurationError(f"omega_ref must be positive, got {self.omega_ref}")
        droop = np.asarray(self.droop, dtype=float)
        if droop.ndim != 1 or droop.size < 1:
            raise ShapeError("droop must be a 1-d vector")
        if not np.all(np.isfinite(droop)) or np.any(droop <= 0):
            raise ConfigurationError("droop coefficients must be positive")
        droop = droop.copy()
        droop.setflags(write=False)
        object.__setattr__(self, "droop", droop)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ControlParams)
            and self.beta == other.beta
            and self.omega_ref == other.omega_ref
            and np.array_equal(self.droop, other.droop)
        )


def _rotation_block(beta: float, diag: float) -> np.ndarray:
    return np.array([[diag, beta], [-beta, diag]])


@dataclass(frozen=True)
class FreqSystem:
    """Leader-follower frequency loop: A = -(L+G), B = G 1, C = A 1,
    and the 2n x 2n closed-loop matrix K built from the coupling block."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    K: np.ndarray
    L: np.ndarray
    beta: float


@dataclass(frozen=True)
class PowerSystem:
    """Leaderless power loop reduced past the consensus direction.

    T diagonalizes the Laplacian; R carries its nonzero eigenvalues and
    K_reduced is the 2(n-1) x 2(n-1) closed-loop matrix on that subspace.
    """

    L: np.ndarray
    T: np.ndarray
    R: np.ndarray
    K_reduced: np.ndarray
    beta: float


def build_freq_system(top: graph.Topology, params: ControlParams) -> FreqSystem:
    """Assemble the frequency closed loop for a connected, pinned topology."""
    if not graph.is_connected(top):
        raise ConfigurationError("frequency control needs a connected topology")
    if top.num_leaders() < 1:
        raise ConfigurationError("frequency control needs at least one pinned leader")
    if params.droop.size != top.n:
        raise ShapeError(f"droop length {params.droop.size} does not match n={top.n}")
    lap = graph.laplacian(top)
    a = graph.pinned_matrix(top)
    b = top.pinning.copy()            # G 1
    c = a @ np.ones(top.n)            # equals -G 1
    k = linalg.kron(_rotation_block(params.beta, 1.0), a)
    return FreqSystem(A=a, B=b, C=c, K=k, L=lap, beta=params.beta)


def freq_derivative(omega, z, d_omega, sys: FreqSystem,
                    params: ControlParams) -> tuple[np.ndarray, np.ndarray]:
    """Time derivatives of the frequency state and its auxiliary state.

    omega_dot = A w + beta A z + B w_ref + L d
    z_dot     = A z - beta A w + beta C w_ref
    """
    n = sys.A.shape[0]
    omega, z, d_omega = (_as_vector(v, n, name) for v, name in
                         ((omega, "omega"), (z, "z"), (d_omega, "d_omega")))
    beta = params.beta
    omega_dot = sys.A @ omega + beta * (sys.A @ z) + sys.B * params.omega_ref + sys.L @ d_omega
    z_dot = sys.A @ z - beta * (sys.A @ omega) + beta * sys.C * params.omega_ref
    return omega_dot, z_dot


def power_derivative(mp_p, z, d_p, lap: np.ndarray,
                     params: ControlParams) -> tuple[np.ndarray, np.ndarray]:
    """Time derivatives of droop-scaled power and its auxiliary state.

    mp_p_dot = -L p + beta L z + L d
    z_dot    = -L z - beta L p

    Both derivatives sum to zero across nodes since the Laplacian has
    zero column sums, so the network mean of mp_p is conserved even
    under attack.
    """
    n = lap.shape[0]
    mp_p, z, d_p = (_as_vector(v, n, name) for v, name in
                    ((mp_p, "mp_p"), (z, "z"), (d_p, "d_p")))
    beta = params.beta
    mp_p_dot = -(lap @ mp_p) + beta * (lap @ z) + lap @ d_p
    z_dot = -(lap @ z) - beta * (lap @ mp_p)
    return mp_p_dot, z_dot


def build_power_reduction(lap: np.ndarray, beta: float = 1.0) -> PowerSystem:
    """Diagonalize the Laplacian and drop its zero (consensus) eigenvalue.

    Raises ConfigurationError when the graph is disconnected (second
    eigenvalue below 1e-9), since the reduction needs a simple zero.
    """
    if not (np.isfinite(beta) and beta > 0):
        raise ConfigurationError(f"beta must be positive, got {beta}")
    eig = linalg.sym_eigen(lap)
    if eig.values[1] <= 1e-9:
        raise ConfigurationError("power reduction needs a connected graph (zero Fiedler value)")
    r = np.diag(eig.values[1:])
    k_reduced = linalg.kron(_rotation_block(beta, -1.0), r)
    return PowerSystem(L=lap.copy(), T=eig.vectors, R=r, K_reduced=k_reduced, beta=beta)


def bound_epsilon_omega(top: graph.Topology, beta: float, d_bar: float) -> float:
    """Steady frequency-error bound lam_max(L) d_bar / (lam_min(L+G) sqrt(1+beta^2))."""
    _check_bound_args(beta, d_bar)
    if not graph.is_connected(top):
        raise ConfigurationError("bound needs a connected topology")
    if top.num_leaders() < 1:
        raise ConfigurationError("bound needs at least one pinned leader")
    lam_max = linalg.sym_eigen(graph.laplacian(top)).values[-1]
    lam_min = linalg.sym_eigen(-graph.pinned_matrix(top)).values[0]
    return float(lam_max * d_bar / (lam_min * np.sqrt(1.0 + beta * beta)))


def bound_epsilon_p(top: graph.Topology, beta: float, d_bar: float) -> float:
    """Steady power-error bound lam_max(L) d_bar / (lam_2(L) sqrt(1+beta^2))."""
    _check_bound_args(beta, d_bar)
    lam = linalg.sym_eigen(graph.laplacian(top)).values
    if lam[1] <= 1e-9:
        raise ConfigurationError("power bound needs a connected topology (zero Fiedler value)")
    return float(lam[-1] * d_bar / (lam[1] * np.sqrt(1.0 + beta * beta)))


def h_beta_norm_check(top: graph.Topology, beta: float) -> tuple[float, float]:
    """Analytic vs numeric operator norm of the stacked inverse block.

    analytic = 1 / (lam_min(L+G) sqrt(1+beta^2)); numeric is the induced
    2-norm of the 2n x n matrix [(A + beta^2 A)^-1; beta (A + beta^2 A)^-1].
    The two agree to 1e-8 relative for any connected pinned topology.
    """
    if not (np.isfinite(beta) and beta > 0):
        raise ConfigurationError(f"beta must be positive, got {beta}")
    if not graph.is_connected(top) or top.num_leaders() < 1:
        raise ConfigurationError("norm check needs a connected, pinned topology")
    a = graph.pinned_matrix(top)
    try:
        block = linalg.inverse((1.0 + beta * beta) * a)
    except SingularMatrixError as err:
        raise ConfigurationError(f"pinned matrix is singular: {err}") from err
    stacked = np.vstack([block, beta * block])
    numeric = linalg.operator_norm(stacked)
    lam_min = linalg.sym_eigen(-a).values[0]
    analytic = 1.0 / (lam_min * np.sqrt(1.0 + beta * beta))
    return float(analytic), float(numeric)


def _as_vector(v, n: int, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.shape != (n,):
        raise ShapeError(f"{name} has shape {arr.shape}, expected ({n},)")
    if not np.all(np.isfinite(arr)):
        raise ShapeError(f"{name} must be finite")
    return arr


def _check_bound_args(beta: float, d_bar: float) -> None:
    if not (np.isfinite(beta) and beta > 0):
        raise ConfigurationError(f"beta must be positive, got {beta}")
    if not (np.isfinite(d_bar) and d_bar >= 0):
        raise ConfigurationError(f"d_bar must be nonnegative, got {d_bar}")
