"""Reduced-order simulator and analysis toolkit for cyber-resilient
distributed secondary control of islanded AC microgrids.

The control layer couples droop-controlled generator agents over a
communication graph; a hidden auxiliary layer of virtual agents makes
the closed loop resilient to bounded false-data injections and enables
per-link attack detection by cross-checking the two layers.
"""

from .analysis import (SteadyState, SweepRow, VerificationReport, beta_sweep,
                       steady_state, verify_bounds)
from .attacks import (TARGET_FREQUENCY, TARGET_POWER, LinkInjection, LtiAttack,
                      aggregate_links, attack_derivative, empirical_sup_norm)
from .cases import CASE_IDS, BenchmarkCase, benchmark_case
from .controllers import (ControlParams, FreqSystem, PowerSystem,
                          bound_epsilon_omega, bound_epsilon_p,
                          build_freq_system, build_power_reduction,
                          freq_derivative, h_beta_norm_check, power_derivative)
from .detection import (DetectionReport, FlaggedLink, IsolationOutcome, detect,
                        estimate_neighbor, isolate, residual)
from .graph import (Topology, fiedler_value, is_connected, laplacian,
                    pinned_matrix, remove_edge)
from .scenario_files import (format_scenario, parse_scenario,
                             parse_scenario_file, write_scenario_file)
from .sim import (DetectionSettings, IsolationEvent, LoadEvent, Scenario,
                  SimState, Trace, apply_load_event, closed_form_oracle, run,
                  run_without_auxiliary, write_trace_csv)

__version__ = "0.1.0"
