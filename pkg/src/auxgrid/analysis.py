"""Post-run verification: steady states, analytic bounds, beta sweeps."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import attacks, controllers, graph
from .exceptions import ConfigurationError
from .sim import Scenario, SimState, Trace, run

_SETTLED_REL = 1e-4
_BOUND_SLACK = 1e-9


@dataclass(frozen=True)
class SteadyState:
    """Per-channel mean and max deviation over the trailing window.

    ``settled`` holds when the frequency and power channels deviate from
    their window means by at most 1e-4 of the channel scale.
    """

    window: float
    mean: SimState
    deviation: SimState
    settled: bool


def channel_steady(times: np.ndarray, values: np.ndarray,
                   window: float) -> tuple[np.ndarray, np.ndarray]:
    """Mean and max |value - mean| per column over the final window."""
    horizon = times[-1] - times[0]
    if not (0 < window <= horizon + 1e-12):
        raise ConfigurationError(f"window {window} outside (0, {horizon}]")
    mask = times >= times[-1] - window
    tail = values[mask]
    mean = tail.mean(axis=0)
    deviation = np.abs(tail - mean).max(axis=0)
    return mean, deviation


def steady_state(trace: Trace, window: float) -> SteadyState:
    mean, dev = channel_steady(trace.times, trace.states, window)
    n = trace.n
    mean_state = SimState.from_vector(n, mean)
    dev_state = SimState.from_vector(n, dev)
    settled = bool(
        np.all(dev_state.omega <= _SETTLED_REL * np.maximum(1.0, np.abs(mean_state.omega)))
        and np.all(dev_state.mp_p <= _SETTLED_REL * np.maximum(1.0, np.abs(mean_state.mp_p))))
    return SteadyState(window=window, mean=mean_state, deviation=dev_state, settled=settled)


@dataclass(frozen=True)
class VerificationReport:
    """Measured steady errors against the closed-form resilience bounds."""

    freq_error_norm: float
    power_error_norm: float
    epsilon_omega: float
    epsilon_p: float
    freq_pass: bool
    power_pass: bool
    d_bar_omega: float
    d_bar_p: float
    delta_p: float
    band: float
    freq_band_entry_time: float
    settled: bool
    nominal_frequency_mean: np.ndarray

    @property
    def all_pass(self) -> bool:
        return self.freq_pass and self.power_pass

    def format_text(self) -> str:
        lines = [
            f"freq_error_norm: {self.freq_error_norm:.9g}",
            f"epsilon_omega: {self.epsilon_omega:.9g}",
            f"freq_bound_pass: {str(self.freq_pass).lower()}",
            f"power_error_norm: {self.power_error_norm:.9g}",
            f"epsilon_p: {self.epsilon_p:.9g}",
            f"power_bound_pass: {str(self.power_pass).lower()}",
            f"d_bar_omega: {self.d_bar_omega:.9g}",
            f"d_bar_p: {self.d_bar_p:.9g}",
            f"delta_p: {self.delta_p:.9g}",
            f"freq_band: {self.band:.6g}",
            f"freq_band_entry_time: {self.freq_band_entry_time:.6g}",
            f"settled: {str(self.settled).lower()}",
            "nominal_frequency_mean: " + " ".join(f"{v:.9g}" for v in self.nominal_frequency_mean),
        ]
        return "\n".join(lines)


def final_topology(trace: Trace, scenario: Scenario) -> graph.Topology:
    """Topology after every isolation recorded in the trace."""
    top = scenario.topology
    for _, edge in trace.isolations:
        top = graph.remove_edge(top, *edge)
    return top


def band_entry_time(trace: Trace, center: float, band: float) -> float:
    """First time after which every node stays within center +/- band."""
    outside = np.abs(trace.omega - center).max(axis=1) > band
    if not outside.any():
        return float(trace.times[0])
    last = int(np.flatnonzero(outside)[-1])
    if last == trace.times.size - 1:
        return float("inf")
    return float(trace.times[last + 1])


def verify_bounds(trace: Trace, scenario: Scenario, window: float | None = None,
                  band: float = 0.5) -> VerificationReport:
    """Compare measured steady errors with the analytic bounds.

    The attack magnitudes are taken from the run itself (empirical sup
    norms of the recorded node-level injections). The settling window
    defaults to the final 10 percent of the horizon.
    """
    if window is None:
        window = 0.1 * scenario.horizon
    ss = steady_state(trace, window)
    omega_ref = scenario.params.omega_ref
    freq_error = float(np.sqrt(((ss.mean.omega - omega_ref) ** 2).sum()))
    delta_p = float(ss.mean.mp_p.mean())
    power_error = float(np.sqrt(((ss.mean.mp_p - delta_p) ** 2).sum()))

    d_bar_omega = attacks.empirical_sup_norm(trace.d_omega)
    d_bar_p = attacks.empirical_sup_norm(trace.d_p)
    top = final_topology(trace, scenario)
    beta = scenario.params.beta
    eps_omega = controllers.bound_epsilon_omega(top, beta, d_bar_omega)
    eps_p = controllers.bound_epsilon_p(top, beta, d_bar_p)

    nominal = trace.nominal_frequency()
    nominal_mean, _ = channel_steady(trace.times, nominal, window)
    return VerificationReport(
        freq_error_norm=freq_error,
        power_error_norm=power_error,
        epsilon_omega=eps_omega,
        epsilon_p=eps_p,
        freq_pass=freq_error <= eps_omega + _BOUND_SLACK,
        power_pass=power_error <= eps_p + _BOUND_SLACK,
        d_bar_omega=d_bar_omega,
        d_bar_p=d_bar_p,
        delta_p=delta_p,
        band=band,
        freq_band_entry_time=band_entry_time(trace, omega_ref, band),
        settled=ss.settled,
        nominal_frequency_mean=nominal_mean,
    )


@dataclass(frozen=True)
class SweepRow:
    beta: float
    measured_e_omega: float
    epsilon_omega: float
    measured_e_p: float
    epsilon_p: float


def beta_sweep(scenario: Scenario, betas) -> list[SweepRow]:
    """Re-run the scenario for each coupling gain and tabulate measured
    steady errors next to the analytic bounds."""
    betas = list(betas)
    if not betas or any(b <= 0 for b in betas):
        raise ConfigurationError("betas must be positive")
    if any(b2 <= b1 for b1, b2 in zip(betas, betas[1:])):
        raise ConfigurationError("betas must be strictly ascending")
    rows = []
    for beta in betas:
        variant = replace(scenario, params=replace(scenario.params, beta=float(beta)))
        report = verify_bounds(run(variant), variant)
        rows.append(SweepRow(beta=float(beta),
                             measured_e_omega=report.freq_error_norm,
                             epsilon_omega=report.epsilon_omega,
                             measured_e_p=report.power_error_norm,
                             epsilon_p=report.epsilon_p))
    return rows


def sweep_csv(rows: list[SweepRow]) -> str:
    lines = ["beta,measured_e_omega,epsilon_omega,measured_e_p,epsilon_p"]
    for r in rows:
        lines.append(",".join(f"{v:.12g}" for v in
                              (r.beta, r.measured_e_omega, r.epsilon_omega,
                               r.measured_e_p, r.epsilon_p)))
    return "\n".join(lines) + "\n"
