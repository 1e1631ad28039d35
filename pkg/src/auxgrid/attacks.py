"""False-data-injection attack models.

Two kinds of injection are supported: constant per-link values added to
the signal a node receives from one neighbor, and node-level LTI attack
dynamics driven by the plant state. Per-link values aggregate into a
node vector (entry i sums everything injected into node i) which enters
the closed loop through the Laplacian; the raw per-link values also
corrupt the signals seen by the detection layer.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import linalg
from .exceptions import ConfigurationError, EmptyTraceError, ShapeError

TARGET_FREQUENCY = "frequency"
TARGET_POWER = "power"
_TARGETS = (TARGET_FREQUENCY, TARGET_POWER)


def _check_target(target: str) -> str:
    if target not in _TARGETS:
        raise ConfigurationError(f"target must be one of {_TARGETS}, got {target!r}")
    return target


@dataclass(frozen=True)
class LinkInjection:
    """Constant injection on one directed link.

    ``edge`` is (receiver, sender): the value corrupts the signal node
    ``edge[0]`` receives from node ``edge[1]``. Units are rad/s for
    frequency links and droop-scaled watts for power links. The
    injection is live for start_time <= t < end_time (open-ended when
    end_time is None) and only while the edge exists.
    """

    edge: tuple[int, int]
    target: str
    value: float
    start_time: float
    end_time: float | None = None

    def __post_init__(self):
        _check_target(self.target)
        i, j = self.edge
        if i == j:
            raise ConfigurationError(f"link injection needs two distinct nodes, got ({i}, {j})")
        if not np.isfinite(self.value):
            raise ConfigurationError("injection value must be finite")
        if not (np.isfinite(self.start_time) and self.start_time >= 0):
            raise ConfigurationError(f"start_time must be nonnegative, got {self.start_time}")
        if self.end_time is not None and self.end_time <= self.start_time:
            raise ConfigurationError("end_time must exceed start_time")
        object.__setattr__(self, "edge", (int(i), int(j)))

    @property
    def receiver(self) -> int:
        return self.edge[0]

    @property
    def sender(self) -> int:
        return self.edge[1]

    def active(self, t: float) -> bool:
        return t >= self.start_time and (self.end_time is None or t < self.end_time)


@dataclass(frozen=True, eq=False)
class LtiAttack:
    """Node-level attack state with linear dynamics d_dot = F d + G x.

    x is the frequency vector (frequency target) or the droop-scaled
    power vector (power target). F must be Hurwitz so the injection
    stays bounded for bounded plant states: for (near-)symmetric F the
    eigenvalues are checked directly, otherwise strict diagonal
    dominance with negative diagonal is required.
    """

    target: str
    F: np.ndarray
    G: np.ndarray
    d0: np.ndarray
    start_time: float

    def __post_init__(self):
        _check_target(self.target)
        f = np.asarray(self.F, dtype=float)
        g = np.asarray(self.G, dtype=float)
        d0 = np.asarray(self.d0, dtype=float)
        if f.ndim != 2 or f.shape[0] != f.shape[1]:
            raise ShapeError(f"F must be square, got shape {f.shape}")
        n = f.shape[0]
        if g.shape != (n, n):
            raise ShapeError(f"G shape {g.shape} does not match F size {n}")
        if d0.shape != (n,):
            raise ShapeError(f"d0 shape {d0.shape} does not match F size {n}")
        if not all(np.all(np.isfinite(arr)) for arr in (f, g, d0)):
            raise ShapeError("attack matrices and initial state must be finite")
        if not (np.isfinite(self.start_time) and self.start_time >= 0):
            raise ConfigurationError(f"start_time must be nonnegative, got {self.start_time}")
        _check_hurwitz(f)
        for arr in (f, g, d0):
            arr.setflags(write=False)
        object.__setattr__(self, "F", f)
        object.__setattr__(self, "G", g)
        object.__setattr__(self, "d0", d0)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, LtiAttack)
            and self.target == other.target
            and self.start_time == other.start_time
            and np.array_equal(self.F, other.F)
            and np.array_equal(self.G, other.G)
            and np.array_equal(self.d0, other.d0)
        )


def _check_hurwitz(f: np.ndarray) -> None:
    scale = linalg.frobenius(f)
    if scale == 0.0:
        raise ConfigurationError("F must be Hurwitz; zero matrix is not")
    if np.abs(f - f.T).max() <= 1e-12 * scale:
        if linalg.sym_eigen(f).values[-1] >= 0.0:
            raise ConfigurationError("F must be Hurwitz (found a nonnegative eigenvalue)")
        return
    diag = np.diag(f)
    off = np.abs(f).sum(axis=1) - np.abs(diag)
    if np.any(diag >= 0) or np.any(np.abs(diag) <= off):
        raise ConfigurationError(
            "non-symmetric F must be strictly diagonally dominant with negative diagonal")


def attack_derivative(d, coupled_state, attack: LtiAttack) -> np.ndarray:
    """F d + G x for an active attack; callers hold d at zero before start."""
    n = attack.F.shape[0]
    d = np.asarray(d, dtype=float)
    x = np.asarray(coupled_state, dtype=float)
    if d.shape != (n,) or x.shape != (n,):
        raise ShapeError(f"expected vectors of length {n}, got {d.shape} and {x.shape}")
    return attack.F @ d + attack.G @ x


def aggregate_links(links: Iterable[LinkInjection], t: float, target: str,
                    topology) -> np.ndarray:
    """Node vector of total injections: entry i sums the values of links
    active at time t whose receiving node is i and whose edge exists."""
    _check_target(target)
    out = np.zeros(topology.n)
    for link in links:
        if link.target != target or not link.active(t):
            continue
        if not topology.has_edge(*link.edge):
            continue
        out[link.receiver] += link.value
    return out


def empirical_sup_norm(samples) -> float:
    """Largest Euclidean norm over the rows of a sampled injection history."""
    arr = np.asarray(samples, dtype=float)
    if arr.size == 0:
        raise EmptyTraceError("empirical sup norm needs at least one sample")
    if arr.ndim == 1:
        arr = arr[:, None]
    return float(np.sqrt((arr * arr).sum(axis=1)).max())
