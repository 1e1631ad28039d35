"""Simulation engine: integration accuracy, events, determinism, export."""

from dataclasses import replace

import numpy as np
import pytest

from auxgrid.attacks import TARGET_FREQUENCY, LinkInjection
from auxgrid.cases import benchmark_case, frequency_attack
from auxgrid.controllers import ControlParams
from auxgrid.exceptions import ConfigurationError, DivergenceError
from auxgrid.graph import Topology
from auxgrid.sim import (LoadEvent, Scenario, SimState, Trace, apply_load_event,
                         closed_form_oracle, run, run_without_auxiliary,
                         write_trace_csv)
from conftest import naive_rk4


def small_scenario(ring4, ring4_params, **overrides) -> Scenario:
    fields = dict(
        topology=ring4, params=ring4_params,
        omega0=np.array([315.0, 313.5, 314.2, 312.8]),
        power0=np.array([6700.0, 6700.0, 4500.0, 4500.0]),
        z_seed=1, step=1e-3, horizon=2.0)
    fields.update(overrides)
    return Scenario(**fields)


def test_single_node_matches_scalar_closed_form():
    """One pinned node has A = -1, so the error obeys a scalar closed form:
    a plain exponential without the hidden layer, and the same exponential
    envelope rotated at the coupling gain with it."""
    top = Topology.from_edges(1, [], pinning=[1.0])
    params = ControlParams(beta=2.0, omega_ref=314.0, droop=np.array([1e-3]))
    scenario = Scenario(topology=top, params=params,
                        omega0=np.array([320.0]), power0=np.array([1000.0]),
                        z_omega0=np.zeros(1), z_p0=np.zeros(1),
                        step=1e-3, horizon=10.0)
    baseline = run_without_auxiliary(scenario)
    assert np.abs(baseline.omega[:, 0]
                  - (314.0 + 6.0 * np.exp(-baseline.times))).max() <= 1e-9
    coupled = run(scenario)
    t = coupled.times
    expected = 314.0 + 6.0 * np.exp(-t) * np.cos(params.beta * t)
    assert np.abs(coupled.omega[:, 0] - expected).max() <= 1e-9


def test_deterministic_given_seed(ring4, ring4_params):
    a = run(small_scenario(ring4, ring4_params))
    b = run(small_scenario(ring4, ring4_params))
    assert np.array_equal(a.states, b.states)
    c = run(small_scenario(ring4, ring4_params, z_seed=2))
    assert not np.array_equal(a.states, c.states)


def test_seeded_and_explicit_auxiliary_init(ring4, ring4_params):
    seeded = small_scenario(ring4, ring4_params)
    z_omega, z_p = seeded.initial_z()
    assert np.all(np.abs(z_omega) <= 1.0) and np.all(np.abs(z_p) <= 1.0)
    explicit = small_scenario(ring4, ring4_params,
                              z_omega0=np.zeros(4), z_p0=np.zeros(4))
    z_omega, z_p = explicit.initial_z()
    assert np.array_equal(z_omega, np.zeros(4))
    assert np.array_equal(z_p, np.zeros(4))


def test_step_halving_changes_terminal_state_negligibly(ring4, ring4_params):
    coarse = run(small_scenario(ring4, ring4_params, horizon=4.0, step=1e-3))
    fine = run(small_scenario(ring4, ring4_params, horizon=4.0, step=5e-4))
    assert np.abs(coarse.states[-1] - fine.states[-1]).max() <= 1e-8


def test_engine_matches_naive_stagewise_rk4(ring4, ring4_params):
    """The segmentwise affine evaluation is the same classical RK4 map as a
    plain stage-by-stage implementation of the full derivative."""
    scenario = small_scenario(ring4, ring4_params, horizon=1.0,
                              lti_attacks=(frequency_attack(0.0),))
    trace = run(scenario)

    from auxgrid.attacks import attack_derivative
    from auxgrid.controllers import build_freq_system, freq_derivative, power_derivative
    sys = build_freq_system(ring4, ring4_params)
    atk = scenario.lti_attacks[0]

    def f(t, x):
        w, zw, p, zp, dw, dp = np.split(x, 6)
        w_dot, zw_dot = freq_derivative(w, zw, dw, sys, ring4_params)
        p_dot, zp_dot = power_derivative(p, zp, dp, sys.L, ring4_params)
        dw_dot = attack_derivative(dw, w, atk)
        return np.concatenate([w_dot, zw_dot, p_dot, zp_dot, dw_dot, np.zeros(4)])

    z_omega0, z_p0 = scenario.initial_z()
    x0 = np.concatenate([scenario.omega0, z_omega0,
                         ring4_params.droop * scenario.power0, z_p0,
                         atk.d0, np.zeros(4)])
    reference = naive_rk4(f, x0, 0.0, 1.0, 1e-3)
    assert np.abs(trace.states[-1] - reference).max() <= 1e-10


def test_closed_form_oracle_matches_rk4(ring4, ring4_params):
    links = tuple(LinkInjection(edge=(i, (i + 1) % 4), target=TARGET_FREQUENCY,
                                value=0.7, start_time=0.5)
                  for i in range(4) if ring4.has_edge(i, (i + 1) % 4))
    scenario = small_scenario(ring4, ring4_params, horizon=3.0, link_attacks=links)
    numeric = run(scenario)
    exact = closed_form_oracle(scenario)
    assert np.abs(numeric.states - exact.states).max() <= 1e-8


def test_closed_form_oracle_rejects_dynamic_content(ring4, ring4_params):
    with pytest.raises(ConfigurationError):
        closed_form_oracle(small_scenario(ring4, ring4_params,
                                          lti_attacks=(frequency_attack(1.0),)))
    with pytest.raises(ConfigurationError):
        closed_form_oracle(small_scenario(
            ring4, ring4_params,
            load_events=(LoadEvent(time=1.0, deltas=np.ones(4)),)))


def test_divergence_guard(ring4, ring4_params):
    huge = small_scenario(ring4, ring4_params, z_omega0=np.full(4, 1e13),
                          z_p0=np.zeros(4))
    with pytest.raises(DivergenceError) as err:
        run(huge)
    assert err.value.time == 0.0


def test_apply_load_event():
    state = SimState(omega=np.zeros(2), z_omega=np.zeros(2),
                     mp_p=np.array([10.0, 20.0]), z_p=np.zeros(2),
                     d_omega=np.zeros(2), d_p=np.zeros(2))
    droop = np.array([2e-3, 3e-3])
    unchanged = apply_load_event(state, np.zeros(2), droop)
    assert np.array_equal(unchanged.mp_p, state.mp_p)
    bumped = apply_load_event(state, np.array([1000.0, 1000.0]), droop)
    assert np.allclose(bumped.mp_p, [12.0, 23.0])
    assert np.array_equal(state.mp_p, [10.0, 20.0])


def test_load_steps_cancel_back_to_original_consensus(ring4, ring4_params):
    """A +50 percent style step followed by its inverse returns the shared
    power to the pre-event consensus levels."""
    deltas = np.array([1500.0, 1500.0, 1000.0, 1000.0])
    scenario = small_scenario(
        ring4, ring4_params, horizon=30.0,
        z_omega0=np.zeros(4), z_p0=np.zeros(4),
        omega0=np.full(4, 314.0),
        load_events=(LoadEvent(time=10.0, deltas=deltas),
                     LoadEvent(time=20.0, deltas=-deltas)))
    trace = run(scenario)
    before = np.argmin(np.abs(trace.times - 10.0)) - 1
    assert np.abs(trace.mp_p[-1] - trace.mp_p[before]).max() <= 1e-6
    # the mean jumps at the first event and returns after the second
    delta_mean = (ring4_params.droop * deltas).mean()
    at_15 = np.argmin(np.abs(trace.times - 15.0))
    assert trace.mp_p[at_15].mean() == pytest.approx(
        trace.mp_p[before].mean() + delta_mean, abs=1e-9)


def test_mean_power_conserved_between_events(ring4, ring4_params):
    scenario = small_scenario(ring4, ring4_params, horizon=5.0,
                              lti_attacks=(frequency_attack(1.0),))
    trace = run(scenario)
    means = trace.mp_p.mean(axis=1)
    assert np.abs(means - means[0]).max() <= 1e-9 * max(1.0, abs(means[0]))


def test_run_without_auxiliary_freezes_hidden_layer(ring4, ring4_params):
    scenario = small_scenario(ring4, ring4_params, horizon=4.0)
    baseline = run_without_auxiliary(scenario)
    z0_omega, z0_p = scenario.initial_z()
    assert np.array_equal(baseline.z_omega[-1], z0_omega)
    assert np.array_equal(baseline.z_p[-1], z0_p)
    # same attack-free limit as the coupled system (slowest mode decays at
    # about 0.186/s on this topology, hence the long horizon)
    full = run(replace(scenario, horizon=90.0))
    reduced = run_without_auxiliary(replace(scenario, horizon=90.0))
    assert np.abs(full.omega[-1] - reduced.omega[-1]).max() <= 1e-6


def test_scenario_validation(ring4, ring4_params):
    with pytest.raises(ConfigurationError):
        small_scenario(ring4, ring4_params, step=1e-3, horizon=1.0005)
    with pytest.raises(ConfigurationError):
        small_scenario(ring4, ring4_params,
                       load_events=(LoadEvent(time=0.00037, deltas=np.zeros(4)),))
    with pytest.raises(ConfigurationError):
        small_scenario(ring4, ring4_params, lti_attacks=(
            frequency_attack(0.0), frequency_attack(1.0)))
    with pytest.raises(ConfigurationError):
        small_scenario(ring4, ring4_params, link_attacks=(
            LinkInjection(edge=(0, 2), target=TARGET_FREQUENCY, value=1.0,
                          start_time=0.0),))  # (0, 2) is not an edge of the ring


def test_trace_csv_round_trip(tmp_path, ring4, ring4_params):
    scenario = small_scenario(ring4, ring4_params, horizon=0.1,
                              detection=benchmark_case("detect_isolate").scenario.detection)
    trace = run(scenario)
    path = tmp_path / "trace.csv"
    write_trace_csv(trace, path)
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    assert header[0] == "t"
    assert header[1:5] == ["omega_1", "omega_2", "omega_3", "omega_4"]
    assert "residual_1_2" in header and "residual_p_1_2" in header
    assert len(lines) == trace.times.size + 1
    parsed = np.array([line.split(",") for line in lines[1:]], dtype=float)
    # 12 significant digits round-trip the states to ~1e-12 relative
    assert np.abs(parsed[:, 1:25] - trace.states).max() <= 1e-9

    subset = tmp_path / "subset.csv"
    write_trace_csv(trace, subset, columns=["t", "omega_3"])
    sub_lines = subset.read_text().splitlines()
    assert sub_lines[0] == "t,omega_3"
    with pytest.raises(ConfigurationError):
        write_trace_csv(trace, subset, columns=["nope"])


def test_trace_views_and_nominal_frequency(ring4, ring4_params):
    trace = run(small_scenario(ring4, ring4_params, horizon=0.5))
    assert trace.omega.shape == (501, 4)
    assert np.array_equal(trace.nominal_frequency(), trace.omega + trace.mp_p)
