"""Built-in benchmark: a four-generator islanded microgrid.

Four droop-controlled generators on a communication ring with one
pinned leader, running at 314 rad/s with units 1 and 2 delivering
6.7 kW and units 3 and 4 delivering 4.5 kW. All cases start at that
operating point (auxiliary states zero). The attack dynamics, their
initial injections, gains and timings match the reference experiment
series on this system.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attacks import TARGET_FREQUENCY, TARGET_POWER, LinkInjection, LtiAttack
from .controllers import ControlParams
from .exceptions import ConfigurationError
from .graph import Topology
from .sim import DetectionSettings, LoadEvent, Scenario

CASE_IDS = ("no_attack", "attack_no_aux", "attack_aux", "load_perturb", "detect_isolate")

_N = 4
_EDGES = ((0, 1), (1, 2), (2, 3), (0, 3))
_PINNING = (1.0, 0.0, 0.0, 0.0)
_BETA = 2.0
_OMEGA_REF = 314.0
_DROOP = (2e-3, 2e-3, 3e-3, 3e-3)
_POWER0 = (6700.0, 6700.0, 4500.0, 4500.0)

_F_FREQ = np.diag([-5.0, -3.0, -5.0, -3.0])
_G_FREQ = np.array([
    [-0.001, -0.002, -0.003, -0.004],
    [-0.003, -0.001, -0.004, -0.002],
    [0.004, 0.003, 0.002, 0.001],
    [0.002, 0.004, 0.001, 0.003],
])
_D0_FREQ = np.array([4.5, 2.5, -4.0, -2.0])

_F_POWER = np.diag([-2.5, -3.0, -2.5, -3.0])
_G_POWER = np.array([
    [-0.035, -0.036, -0.037, -0.038],
    [-0.088, -0.085, -0.086, -0.087],
    [0.037, 0.038, 0.035, 0.036],
    [0.086, 0.087, 0.088, 0.085],
])
_D0_POWER = np.array([-4.0, -2.5, 3.0, 1.5])

# Equal per-node share of the benchmark load swing, sized so the
# post-step dispatch lands near 8 kW / 5.4 kW on the two droop groups.
_LOAD_DELTA_W = 1100.0


@dataclass(frozen=True)
class BenchmarkCase:
    case_id: str
    scenario: Scenario
    use_auxiliary: bool
    description: str


def four_dg_topology() -> Topology:
    return Topology.from_edges(_N, _EDGES, pinning=_PINNING)


def benchmark_params(beta: float = _BETA) -> ControlParams:
    return ControlParams(beta=beta, omega_ref=_OMEGA_REF, droop=np.array(_DROOP))


def frequency_attack(start_time: float = 10.0) -> LtiAttack:
    return LtiAttack(target=TARGET_FREQUENCY, F=_F_FREQ, G=_G_FREQ,
                     d0=_D0_FREQ, start_time=start_time)


def power_attack(start_time: float = 30.0) -> LtiAttack:
    return LtiAttack(target=TARGET_POWER, F=_F_POWER, G=_G_POWER,
                     d0=_D0_POWER, start_time=start_time)


def _base_scenario(horizon: float, seed: int, **overrides) -> Scenario:
    fields = dict(
        topology=four_dg_topology(),
        params=benchmark_params(),
        omega0=np.full(_N, _OMEGA_REF),
        power0=np.array(_POWER0),
        z_seed=seed,
        z_omega0=np.zeros(_N),
        z_p0=np.zeros(_N),
        step=1e-3,
        horizon=horizon,
    )
    fields.update(overrides)
    return Scenario(**fields)


def benchmark_case(case_id: str, seed: int = 0) -> BenchmarkCase:
    """Build one of the named benchmark cases on the four-generator system."""
    if case_id == "no_attack":
        return BenchmarkCase(
            case_id=case_id,
            scenario=_base_scenario(horizon=20.0, seed=seed),
            use_auxiliary=True,
            description="nominal operation, no attacks",
        )
    if case_id in ("attack_aux", "attack_no_aux"):
        scenario = _base_scenario(
            horizon=40.0, seed=seed,
            lti_attacks=(frequency_attack(10.0), power_attack(30.0)))
        return BenchmarkCase(
            case_id=case_id,
            scenario=scenario,
            use_auxiliary=case_id == "attack_aux",
            description=("frequency attack at 10 s and power attack at 30 s, "
                         + ("with" if case_id == "attack_aux" else "without")
                         + " the auxiliary layer"),
        )
    if case_id == "load_perturb":
        deltas = np.full(_N, _LOAD_DELTA_W)
        scenario = _base_scenario(
            horizon=90.0, seed=seed,
            lti_attacks=(frequency_attack(10.0), power_attack(50.0)),
            load_events=(LoadEvent(time=30.0, deltas=deltas),
                         LoadEvent(time=70.0, deltas=-deltas)))
        return BenchmarkCase(
            case_id=case_id,
            scenario=scenario,
            use_auxiliary=True,
            description="attacks at 10 s and 50 s with load steps at 30 s and 70 s",
        )
    if case_id == "detect_isolate":
        scenario = _base_scenario(
            horizon=40.0, seed=seed,
            link_attacks=(LinkInjection(edge=(0, 3), target=TARGET_FREQUENCY,
                                        value=-2.0, start_time=10.0),),
            detection=DetectionSettings(enabled=True, threshold=1e-3,
                                        dwell=0.1, auto_isolate=True))
        return BenchmarkCase(
            case_id=case_id,
            scenario=scenario,
            use_auxiliary=True,
            description="-2 rad/s injection on the link from unit 4 to unit 1 at 10 s",
        )
    raise ConfigurationError(f"unknown case {case_id!r}; choose one of {CASE_IDS}")
