"""Deterministic fixed-step simulation of the coupled control system.

The stacked state is (omega, z_omega, mp_p, z_p, d_omega, d_p): the
frequency layer and its auxiliary state, the droop-scaled power layer
and its auxiliary state, and the node-level attack states. Integration
is classical fourth-order Runge-Kutta on a uniform grid. All scheduled
events (attack activations, load steps, link isolations) fire exactly
at step boundaries and are applied before the step that leaves the
event time, so every recorded sample reflects the post-event system.

Within a segment between events the dynamics are affine, so the engine
probes the derivative once per segment to obtain (M, u) with
x_dot = M x + u and evaluates the RK4 stages as matrix-vector products.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import attacks, controllers, graph, linalg
from .attacks import TARGET_FREQUENCY, TARGET_POWER, LinkInjection, LtiAttack
from .exceptions import ConfigurationError, DivergenceError, ShapeError

_DIVERGENCE_LIMIT = 1e12


@dataclass(frozen=True)
class DetectionSettings:
    """Residual test configuration for the inter-layer detector."""

    enabled: bool = False
    threshold: float = 1e-3
    dwell: float = 0.1
    auto_isolate: bool = False

    def __post_init__(self):
        if self.threshold <= 0 or not np.isfinite(self.threshold):
            raise ConfigurationError(f"threshold must be positive, got {self.threshold}")
        if self.dwell < 0 or not np.isfinite(self.dwell):
            raise ConfigurationError(f"dwell must be nonnegative, got {self.dwell}")


@dataclass(frozen=True, eq=False)
class LoadEvent:
    """Additive per-node active-power step (watts) at a fixed time."""

    time: float
    deltas: np.ndarray

    def __post_init__(self):
        deltas = np.asarray(self.deltas, dtype=float)
        if deltas.ndim != 1 or not np.all(np.isfinite(deltas)):
            raise ShapeError("load deltas must be a finite 1-d vector")
        deltas = deltas.copy()
        deltas.setflags(write=False)
        object.__setattr__(self, "deltas", deltas)

    def __eq__(self, other) -> bool:
        return (isinstance(other, LoadEvent) and self.time == other.time
                and np.array_equal(self.deltas, other.deltas))


@dataclass(frozen=True)
class IsolationEvent:
    """Scheduled removal of one undirected communication edge."""

    time: float
    edge: tuple[int, int]


@dataclass(frozen=True, eq=False)
class Scenario:
    """Complete experiment description.

    When explicit auxiliary initial states are not given they are drawn
    uniformly from [-1, 1] with a generator seeded by ``z_seed`` (the
    frequency-layer vector is drawn first, then the power-layer one).
    Event times must be multiples of the integration step.
    """

    topology: graph.Topology
    params: controllers.ControlParams
    omega0: np.ndarray
    power0: np.ndarray
    horizon: float
    step: float = 1e-3
    z_seed: int = 0
    z_omega0: np.ndarray | None = None
    z_p0: np.ndarray | None = None
    link_attacks: tuple[LinkInjection, ...] = ()
    lti_attacks: tuple[LtiAttack, ...] = ()
    load_events: tuple[LoadEvent, ...] = ()
    isolation_events: tuple[IsolationEvent, ...] = ()
    detection: DetectionSettings = field(default_factory=DetectionSettings)

    def __post_init__(self):
        n = self.topology.n
        if self.params.droop.size != n:
            raise ConfigurationError(f"droop length {self.params.droop.size} != n={n}")
        for name in ("omega0", "power0"):
            vec = np.asarray(getattr(self, name), dtype=float)
            if vec.shape != (n,) or not np.all(np.isfinite(vec)):
                raise ShapeError(f"{name} must be a finite vector of length {n}")
            vec = vec.copy()
            vec.setflags(write=False)
            object.__setattr__(self, name, vec)
        for name in ("z_omega0", "z_p0"):
            vec = getattr(self, name)
            if vec is None:
                continue
            vec = np.asarray(vec, dtype=float)
            if vec.shape != (n,) or not np.all(np.isfinite(vec)):
                raise ShapeError(f"{name} must be a finite vector of length {n}")
            vec = vec.copy()
            vec.setflags(write=False)
            object.__setattr__(self, name, vec)
        if not (np.isfinite(self.step) and self.step > 0):
            raise ConfigurationError(f"step must be positive, got {self.step}")
        if not (np.isfinite(self.horizon) and self.horizon > 0):
            raise ConfigurationError(f"horizon must be positive, got {self.horizon}")
        if abs(self.horizon / self.step - round(self.horizon / self.step)) > 1e-6:
            raise ConfigurationError("horizon must be a whole number of steps")

        object.__setattr__(self, "link_attacks", tuple(self.link_attacks))
        object.__setattr__(self, "lti_attacks", tuple(self.lti_attacks))
        object.__setattr__(self, "load_events",
                           tuple(sorted(self.load_events, key=lambda e: e.time)))
        object.__setattr__(self, "isolation_events",
                           tuple(sorted(self.isolation_events, key=lambda e: e.time)))

        for link in self.link_attacks:
            if not self.topology.has_edge(*link.edge):
                raise ConfigurationError(f"link attack on nonexistent edge {link.edge}")
            self._check_event_time(link.start_time, "link attack start")
            if link.end_time is not None:
                self._check_event_time(link.end_time, "link attack end")
        for target in (TARGET_FREQUENCY, TARGET_POWER):
            if sum(1 for a in self.lti_attacks if a.target == target) > 1:
                raise ConfigurationError(f"at most one LTI attack per target ({target})")
        for atk in self.lti_attacks:
            if atk.F.shape[0] != n:
                raise ConfigurationError(f"LTI attack size {atk.F.shape[0]} != n={n}")
            self._check_event_time(atk.start_time, "LTI attack start")
        for event in self.load_events:
            if event.deltas.size != n:
                raise ConfigurationError(f"load deltas length {event.deltas.size} != n={n}")
            self._check_event_time(event.time, "load event")
        for event in self.isolation_events:
            if not self.topology.has_edge(*event.edge):
                raise ConfigurationError(f"isolation of nonexistent edge {event.edge}")
            self._check_event_time(event.time, "isolation event")

    def _check_event_time(self, t: float, what: str) -> None:
        if not (0.0 <= t <= self.horizon):
            raise ConfigurationError(f"{what} time {t} outside [0, {self.horizon}]")
        k = round(t / self.step)
        if abs(t - k * self.step) > 1e-9 * max(1.0, abs(t)):
            raise ConfigurationError(f"{what} time {t} is not a multiple of step {self.step}")

    def __eq__(self, other) -> bool:
        if not isinstance(other, Scenario):
            return False
        simple = ("horizon", "step", "z_seed", "link_attacks", "lti_attacks",
                  "load_events", "isolation_events", "detection", "topology", "params")
        if any(getattr(self, f) != getattr(other, f) for f in simple):
            return False
        return all(_optional_array_equal(getattr(self, f), getattr(other, f))
                   for f in ("omega0", "power0", "z_omega0", "z_p0"))

    def step_index(self, t: float) -> int:
        return int(round(t / self.step))

    def initial_z(self) -> tuple[np.ndarray, np.ndarray]:
        """Auxiliary initial states: explicit values or a seeded draw."""
        rng = np.random.default_rng(self.z_seed)
        draw = rng.uniform(-1.0, 1.0, size=2 * self.topology.n)
        z_omega = self.z_omega0 if self.z_omega0 is not None else draw[: self.topology.n]
        z_p = self.z_p0 if self.z_p0 is not None else draw[self.topology.n:]
        return np.array(z_omega, dtype=float), np.array(z_p, dtype=float)


def _optional_array_equal(a, b) -> bool:
    if a is None or b is None:
        return a is None and b is None
    return np.array_equal(a, b)


@dataclass(frozen=True)
class SimState:
    """One instant of the stacked simulation state."""

    omega: np.ndarray
    z_omega: np.ndarray
    mp_p: np.ndarray
    z_p: np.ndarray
    d_omega: np.ndarray
    d_p: np.ndarray

    @classmethod
    def from_vector(cls, n: int, x: np.ndarray) -> "SimState":
        parts = [x[k * n:(k + 1) * n].copy() for k in range(6)]
        return cls(*parts)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.omega, self.z_omega, self.mp_p,
                               self.z_p, self.d_omega, self.d_p])


def apply_load_event(state: SimState, deltas, droop) -> SimState:
    """Add per-node watt deltas to the delivered power: mp_p += droop * deltas."""
    deltas = np.asarray(deltas, dtype=float)
    droop = np.asarray(droop, dtype=float)
    if deltas.shape != state.mp_p.shape or droop.shape != state.mp_p.shape:
        raise ShapeError("load deltas and droop must match the state length")
    return replace(state, mp_p=state.mp_p + droop * deltas)


@dataclass(eq=False)
class Trace:
    """Uniform-grid history of the stacked state.

    ``states`` has columns [omega | z_omega | mp_p | z_p | d_omega | d_p]
    where the d columns hold the total node-level injection (LTI attack
    state plus aggregated link injections). When detection is enabled,
    per-directed-link received and estimated signals are recorded for
    every edge of the initial topology; after an isolation the removed
    link carries no signal and its entries equal the clean value.
    """

    times: np.ndarray
    n: int
    step: float
    states: np.ndarray
    received: dict = field(default_factory=dict)
    estimated: dict = field(default_factory=dict)
    detection_pairs: tuple = ()
    load_times: tuple = ()
    isolations: tuple = ()

    @property
    def omega(self) -> np.ndarray:
        return self.states[:, 0: self.n]

    @property
    def z_omega(self) -> np.ndarray:
        return self.states[:, self.n: 2 * self.n]

    @property
    def mp_p(self) -> np.ndarray:
        return self.states[:, 2 * self.n: 3 * self.n]

    @property
    def z_p(self) -> np.ndarray:
        return self.states[:, 3 * self.n: 4 * self.n]

    @property
    def d_omega(self) -> np.ndarray:
        return self.states[:, 4 * self.n: 5 * self.n]

    @property
    def d_p(self) -> np.ndarray:
        return self.states[:, 5 * self.n: 6 * self.n]

    def residual(self, target: str, receiver: int, sender: int) -> np.ndarray:
        key = (target, receiver, sender)
        return np.abs(self.received[key] - self.estimated[key])

    def nominal_frequency(self) -> np.ndarray:
        """Per-node droop set point reconstructed as omega + mp_p."""
        return self.omega + self.mp_p

    def column_names(self) -> list[str]:
        names = ["t"]
        for group in ("omega", "z_omega", "mp_p", "z_p", "d_omega", "d_p"):
            names += [f"{group}_{i + 1}" for i in range(self.n)]
        for target, i, j in self.detection_pairs:
            prefix = "residual" if target == TARGET_FREQUENCY else "residual_p"
            names.append(f"{prefix}_{i + 1}_{j + 1}")
        return names

    def values_matrix(self) -> np.ndarray:
        cols = [self.times[:, None], self.states]
        for target, i, j in self.detection_pairs:
            cols.append(self.residual(target, i, j)[:, None])
        return np.hstack(cols)


def run(scenario: Scenario) -> Trace:
    """Integrate the full coupled dynamics over the scenario horizon."""
    return _integrate(scenario, include_aux=True)


def run_without_auxiliary(scenario: Scenario) -> Trace:
    """Baseline without the hidden layer: the auxiliary states are frozen
    and the controllers reduce to plain pinned/leaderless consensus."""
    return _integrate(scenario, include_aux=False)


class _Structure:
    """System composition valid between two event boundaries."""

    def __init__(self, scenario: Scenario, include_aux: bool):
        self.scenario = scenario
        self.include_aux = include_aux
        self.topology = scenario.topology
        self.params = scenario.params
        self.n = scenario.topology.n
        self.lti = {a.target: a for a in scenario.lti_attacks}
        self.lti_active = {TARGET_FREQUENCY: False, TARGET_POWER: False}
        self.removed_edges: list[tuple[float, tuple[int, int]]] = []
        self._rebuild()

    def _rebuild(self) -> None:
        self.freq_sys = controllers.build_freq_system(self.topology, self.params)
        self.lap = self.freq_sys.L

    def isolate(self, time: float, edge: tuple[int, int]) -> None:
        self.topology = graph.remove_edge(self.topology, *edge)
        self.removed_edges.append((time, edge))
        self._rebuild()

    def aggregates(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        # Evaluated at the segment midpoint so floating-point grid times
        # can never straddle an activation boundary.
        links = self.scenario.link_attacks
        return (attacks.aggregate_links(links, t, TARGET_FREQUENCY, self.topology),
                attacks.aggregate_links(links, t, TARGET_POWER, self.topology))

    def derivative(self, x: np.ndarray, agg_w: np.ndarray, agg_p: np.ndarray) -> np.ndarray:
        n = self.n
        omega, z_w, mp_p, z_p, d_w, d_p = (x[k * n:(k + 1) * n] for k in range(6))
        total_w = d_w + agg_w
        total_p = d_p + agg_p
        if self.include_aux:
            w_dot, zw_dot = controllers.freq_derivative(omega, z_w, total_w,
                                                        self.freq_sys, self.params)
            p_dot, zp_dot = controllers.power_derivative(mp_p, z_p, total_p,
                                                         self.lap, self.params)
        else:
            zero = np.zeros(n)
            w_dot = controllers.freq_derivative(omega, zero, total_w,
                                                self.freq_sys, self.params)[0]
            p_dot = controllers.power_derivative(mp_p, zero, total_p,
                                                 self.lap, self.params)[0]
            zw_dot = zero
            zp_dot = zero
        dw_dot = np.zeros(n)
        dp_dot = np.zeros(n)
        if self.lti_active[TARGET_FREQUENCY]:
            dw_dot = attacks.attack_derivative(d_w, omega, self.lti[TARGET_FREQUENCY])
        if self.lti_active[TARGET_POWER]:
            dp_dot = attacks.attack_derivative(d_p, mp_p, self.lti[TARGET_POWER])
        return np.concatenate([w_dot, zw_dot, p_dot, zp_dot, dw_dot, dp_dot])

    def affine_form(self, segment_start: float) -> tuple[np.ndarray, np.ndarray]:
        """Probe the derivative to obtain x_dot = M x + u for this segment."""
        agg_w, agg_p = self.aggregates(segment_start + 0.5 * self.scenario.step)
        dim = 6 * self.n
        offset = self.derivative(np.zeros(dim), agg_w, agg_p)
        m = np.empty((dim, dim))
        basis = np.eye(dim)
        for i in range(dim):
            m[:, i] = self.derivative(basis[i], agg_w, agg_p) - offset
        return m, offset


def _event_schedule(scenario: Scenario) -> dict[int, list[tuple[str, object]]]:
    sched: dict[int, list[tuple[str, object]]] = {}

    def add(t: float, kind: str, payload) -> None:
        sched.setdefault(scenario.step_index(t), []).append((kind, payload))

    for atk in scenario.lti_attacks:
        add(atk.start_time, "lti", atk)
    for link in scenario.link_attacks:
        add(link.start_time, "segment", None)
        if link.end_time is not None:
            add(link.end_time, "segment", None)
    for event in scenario.load_events:
        add(event.time, "load", event)
    for event in scenario.isolation_events:
        add(event.time, "isolate", event)
    return sched


def _apply_events(events, structure: _Structure, x: np.ndarray, t: float,
                  scenario: Scenario, load_times: list[float]) -> None:
    n = structure.n
    for kind, payload in events:
        if kind == "lti":
            atk: LtiAttack = payload
            slot = 4 if atk.target == TARGET_FREQUENCY else 5
            x[slot * n:(slot + 1) * n] = atk.d0
            structure.lti_active[atk.target] = True
        elif kind == "load":
            event: LoadEvent = payload
            x[2 * n: 3 * n] += scenario.params.droop * event.deltas
            load_times.append(t)
        elif kind == "isolate":
            event: IsolationEvent = payload
            structure.isolate(t, event.edge)
        # "segment" entries only force a boundary so aggregates refresh.


def _integrate(scenario: Scenario, include_aux: bool) -> Trace:
    n = scenario.topology.n
    steps = scenario.step_index(scenario.horizon)
    h = scenario.step
    times = h * np.arange(steps + 1)

    z_omega0, z_p0 = scenario.initial_z()
    x = np.concatenate([scenario.omega0, z_omega0,
                        scenario.params.droop * scenario.power0, z_p0,
                        np.zeros(n), np.zeros(n)])

    structure = _Structure(scenario, include_aux)
    schedule = _event_schedule(scenario)
    boundaries = sorted(k for k in schedule if 0 <= k <= steps)
    load_times: list[float] = []

    states = np.empty((steps + 1, 6 * n))
    if 0 in schedule:
        _apply_events(schedule[0], structure, x, 0.0, scenario, load_times)
    _check_divergence(x, 0.0)
    states[0] = x

    segment_starts = [0] + [k for k in boundaries if 0 < k < steps]
    segment_ends = segment_starts[1:] + [steps]
    for k0, k1 in zip(segment_starts, segment_ends):
        if k0 != 0 and k0 in schedule:
            _apply_events(schedule[k0], structure, x, times[k0], scenario, load_times)
            _check_divergence(x, times[k0])
            states[k0] = x
        m, u = structure.affine_form(times[k0])
        for k in range(k0, k1):
            k1v = m @ x + u
            k2v = m @ (x + 0.5 * h * k1v) + u
            k3v = m @ (x + 0.5 * h * k2v) + u
            k4v = m @ (x + h * k3v) + u
            x = x + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
            _check_divergence(x, times[k + 1])
            states[k + 1] = x
    if steps in schedule:
        _apply_events(schedule[steps], structure, x, times[steps], scenario, load_times)
        states[steps] = x

    _add_link_aggregates(states, scenario, structure.removed_edges, n)
    trace = Trace(times=times, n=n, step=h, states=states,
                  load_times=tuple(load_times),
                  isolations=tuple(structure.removed_edges))
    if scenario.detection.enabled:
        _record_detection_signals(trace, scenario, structure.removed_edges)
    return trace


def _check_divergence(x: np.ndarray, t: float) -> None:
    norm = float(np.sqrt(x @ x))
    if not np.isfinite(norm) or norm > _DIVERGENCE_LIMIT:
        raise DivergenceError(time=t, norm=norm)


def _link_alive_mask(scenario: Scenario, n_samples: int, link: LinkInjection,
                     removed_edges) -> np.ndarray:
    """Sample mask of link activity, aligned to step indices so grid-time
    rounding can never shift an event by one sample."""
    idx = np.arange(n_samples)
    mask = idx >= scenario.step_index(link.start_time)
    if link.end_time is not None:
        mask &= idx < scenario.step_index(link.end_time)
    for iso_time, edge in removed_edges:
        if set(edge) == set(link.edge):
            mask &= idx < scenario.step_index(iso_time)
    return mask


def _add_link_aggregates(states: np.ndarray, scenario: Scenario,
                         removed_edges, n: int) -> None:
    for link in scenario.link_attacks:
        mask = _link_alive_mask(scenario, states.shape[0], link, removed_edges)
        slot = 4 if link.target == TARGET_FREQUENCY else 5
        states[mask, slot * n + link.receiver] += link.value


def _record_detection_signals(trace: Trace, scenario: Scenario, removed_edges) -> None:
    """Per-directed-link received and estimated signals over the whole run.

    The estimate is rebuilt from the hidden-layer pair (beta*z_j,
    z_j - beta*x_j) exactly as a node would; the received signal is the
    true neighbor value plus any live injections on that direction.
    """
    from .detection import estimate_neighbor  # local import to avoid a cycle

    beta = scenario.params.beta
    pairs = []
    for i, j in scenario.topology.edges():
        pairs += [(i, j), (j, i)]
    pairs.sort()

    layer_values = {TARGET_FREQUENCY: (trace.omega, trace.z_omega),
                    TARGET_POWER: (trace.mp_p, trace.z_p)}
    keys = []
    for target in (TARGET_FREQUENCY, TARGET_POWER):
        values, z_values = layer_values[target]
        for i, j in pairs:
            clean = values[:, j].copy()
            z_bar = beta * z_values[:, j]
            w_bar = z_values[:, j] - beta * values[:, j]
            estimated = estimate_neighbor(z_bar, w_bar, beta)
            received = clean.copy()
            for link in scenario.link_attacks:
                if link.target == target and link.edge == (i, j):
                    mask = _link_alive_mask(scenario, trace.times.size, link, removed_edges)
                    received[mask] += link.value
            key = (target, i, j)
            trace.received[key] = received
            trace.estimated[key] = estimated
            keys.append(key)
    trace.detection_pairs = tuple(keys)


def closed_form_oracle(scenario: Scenario, include_aux: bool = True) -> Trace:
    """Exact trajectory for piecewise-constant injections.

    Valid only when every attack is a constant link injection and there
    are no load or isolation events: the stacked dynamics are then
    affine per segment and the grid samples follow from one matrix
    exponential of the augmented system per segment.
    """
    if scenario.lti_attacks:
        raise ConfigurationError("closed form requires constant (link) attacks only")
    if scenario.load_events or scenario.isolation_events:
        raise ConfigurationError("closed form does not support load or isolation events")

    n = scenario.topology.n
    steps = scenario.step_index(scenario.horizon)
    h = scenario.step
    times = h * np.arange(steps + 1)

    z_omega0, z_p0 = scenario.initial_z()
    x = np.concatenate([scenario.omega0, z_omega0,
                        scenario.params.droop * scenario.power0, z_p0,
                        np.zeros(n), np.zeros(n)])

    structure = _Structure(scenario, include_aux)
    schedule = _event_schedule(scenario)
    boundaries = sorted(k for k in schedule if 0 < k < steps)
    states = np.empty((steps + 1, 6 * n))
    states[0] = x

    dim = 6 * n
    segment_starts = [0] + boundaries
    segment_ends = boundaries + [steps]
    for k0, k1 in zip(segment_starts, segment_ends):
        m, u = structure.affine_form(times[k0])
        augmented = np.zeros((dim + 1, dim + 1))
        augmented[:dim, :dim] = m
        augmented[:dim, dim] = u
        propagator = linalg.mat_exp(augmented * h)
        x_aug = np.concatenate([x, [1.0]])
        for k in range(k0, k1):
            x_aug = propagator @ x_aug
            states[k + 1] = x_aug[:dim]
        x = x_aug[:dim]

    _add_link_aggregates(states, scenario, [], n)
    trace = Trace(times=times, n=n, step=h, states=states)
    if scenario.detection.enabled:
        _record_detection_signals(trace, scenario, [])
    return trace


def rk4_step(f, x: np.ndarray, t: float, h: float) -> np.ndarray:
    """One classical RK4 step for x_dot = f(t, x); used as a cross-check."""
    k1 = f(t, x)
    k2 = f(t + 0.5 * h, x + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, x + 0.5 * h * k2)
    k4 = f(t + h, x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def write_trace_csv(trace: Trace, path, columns: list[str] | None = None) -> None:
    """Write the trace as CSV, one row per step, 12 significant digits.

    ``columns`` selects and orders a subset of the header names.
    """
    names = trace.column_names()
    matrix = trace.values_matrix()
    if columns is not None:
        missing = [c for c in columns if c not in names]
        if missing:
            raise ConfigurationError(f"unknown trace columns: {', '.join(missing)}")
        idx = [names.index(c) for c in columns]
        names = list(columns)
        matrix = matrix[:, idx]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(names) + "\n")
        for row in matrix:
            fh.write(",".join(f"{v:.12g}" for v in row) + "\n")
