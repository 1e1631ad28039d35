"""Inter-layer attack detection and link isolation.

Each node can rebuild the state its neighbor claims to have from two
signals that travel on the hidden auxiliary network: beta*z_j and
z_j - beta*x_j. The rebuilt value is compared with the (possibly
corrupted) value received on the ordinary control link; a persistent
mismatch marks the link as attacked. Flagged links may be isolated only
while the remaining network stays connected.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import graph
from .exceptions import ConfigurationError, IsolationRefusedError
from .sim import Trace


def estimate_neighbor(z_bar, w_bar, beta: float):
    """Neighbor state rebuilt from the hidden-layer signal pair.

    Returns (z_bar / beta - w_bar) / beta, which equals the true
    neighbor state exactly when the hidden-layer signals are clean.
    Accepts scalars or arrays.
    """
    if not (np.isfinite(beta) and beta > 0):
        raise ConfigurationError(f"beta must be positive, got {beta}")
    return (z_bar / beta - w_bar) / beta


def residual(received, estimated):
    """Absolute mismatch between the received and the rebuilt signal."""
    return np.abs(np.asarray(received, dtype=float) - np.asarray(estimated, dtype=float))


@dataclass(frozen=True)
class FlaggedLink:
    """One directed link whose residual stayed above threshold for the
    dwell duration. ``first_detection`` is the earliest time at which the
    persistence condition was satisfied."""

    target: str
    receiver: int
    sender: int
    first_detection: float
    max_residual: float


@dataclass(frozen=True)
class IsolationOutcome:
    edge: tuple[int, int]
    removed: bool
    connected_after: bool
    reason: str = ""


@dataclass(frozen=True)
class DetectionReport:
    """Residual summary: per-directed-link maxima, flagged links, and any
    isolation decisions taken on their undirected edges."""

    threshold: float
    dwell: float
    max_residuals: dict
    flagged: tuple[FlaggedLink, ...]
    isolations: tuple[IsolationOutcome, ...] = field(default=())

    def flagged_edges(self) -> set[tuple[int, int]]:
        """Undirected edges carrying at least one flagged direction."""
        return {tuple(sorted((f.receiver, f.sender))) for f in self.flagged}

    def format_text(self) -> str:
        lines = [
            f"threshold: {self.threshold:.6g}",
            f"dwell: {self.dwell:.6g}",
            f"links_monitored: {len(self.max_residuals)}",
            f"flagged_count: {len(self.flagged)}",
        ]
        for k, ((target, i, j), value) in enumerate(sorted(self.max_residuals.items())):
            lines.append(f"max_residual_{target}_{i + 1}_{j + 1}: {value:.6g}")
        for k, f in enumerate(self.flagged, start=1):
            lines.append(
                f"flagged_{k}: target={f.target} link=({f.receiver + 1},{f.sender + 1}) "
                f"first_detection={f.first_detection:.6g} max_residual={f.max_residual:.6g}")
        for k, iso in enumerate(self.isolations, start=1):
            lines.append(
                f"isolation_{k}: edge=({iso.edge[0] + 1},{iso.edge[1] + 1}) "
                f"removed={str(iso.removed).lower()} "
                f"connected_after={str(iso.connected_after).lower()}"
                + (f" reason={iso.reason}" if iso.reason else ""))
        return "\n".join(lines)


def detect(trace: Trace, threshold: float, dwell: float) -> DetectionReport:
    """Flag every directed link whose residual exceeds ``threshold``
    continuously for at least ``dwell`` seconds.

    Operates on the sampled trace without inter-sample interpolation; a
    run of samples spanning exactly the dwell duration counts.
    """
    if not trace.detection_pairs:
        raise ConfigurationError("trace carries no detection signals (detection disabled?)")
    if threshold <= 0:
        raise ConfigurationError(f"threshold must be positive, got {threshold}")
    if dwell < 0:
        raise ConfigurationError(f"dwell must be nonnegative, got {dwell}")

    flagged = []
    max_residuals = {}
    for key in trace.detection_pairs:
        target, i, j = key
        res = np.abs(trace.received[key] - trace.estimated[key])
        max_residuals[key] = float(res.max())
        above = res > threshold
        if not above.any():
            continue
        first = _first_persistent_time(trace.times, above, dwell)
        if first is not None:
            flagged.append(FlaggedLink(target=target, receiver=i, sender=j,
                                       first_detection=first,
                                       max_residual=max_residuals[key]))
    flagged.sort(key=lambda f: (f.first_detection, f.receiver, f.sender, f.target))
    return DetectionReport(threshold=threshold, dwell=dwell,
                           max_residuals=max_residuals, flagged=tuple(flagged))


def _first_persistent_time(times: np.ndarray, above: np.ndarray, dwell: float) -> float | None:
    padded = np.concatenate([[False], above, [False]])
    starts = np.flatnonzero(padded[1:].astype(int) - padded[:-1].astype(int) == 1)
    ends = np.flatnonzero(padded[1:].astype(int) - padded[:-1].astype(int) == -1) - 1
    for s, e in zip(starts, ends):
        if times[e] - times[s] >= dwell - 1e-12:
            return float(times[s] + dwell)
    return None


def isolate(top: graph.Topology, edge: tuple[int, int]) -> graph.Topology:
    """Remove the edge if the network stays connected, else refuse.

    Raises IsolationRefusedError (leaving the topology unchanged) when
    removal would disconnect the graph; the resilience bounds still hold
    for the un-isolated network, so refusing is safe.
    """
    candidate = graph.remove_edge(top, *edge)
    if not graph.is_connected(candidate):
        raise IsolationRefusedError(
            f"removing edge ({edge[0]}, {edge[1]}) would disconnect the network")
    return candidate
