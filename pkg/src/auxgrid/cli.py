"""Command-line front end.

Subcommands: run, verify, detect, benchmark, sweep. Exit codes:
0 success (and all checks passed), 1 verification or detection failure,
2 usage or parse error, 3 runtime divergence.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from . import analysis, detection, sim
from .cases import CASE_IDS, benchmark_case
from .exceptions import (ConfigurationError, DivergenceError, ScenarioParseError,
                         ShapeError)
from .scenario_files import parse_scenario_file, write_scenario_file


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="auxgrid",
        description="Simulate and analyze auxiliary-layer resilient microgrid control.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="integrate a scenario and write the trace CSV")
    _scenario_args(run_p)
    run_p.add_argument("--out", required=True, help="trace CSV output path")
    run_p.add_argument("--columns", help="comma-separated subset of trace columns")
    run_p.set_defaults(func=cmd_run)

    verify_p = sub.add_parser("verify", help="check steady errors against the analytic bounds")
    _scenario_args(verify_p)
    verify_p.set_defaults(func=cmd_verify)

    detect_p = sub.add_parser("detect", help="run the inter-layer residual detector")
    _scenario_args(detect_p)
    detect_p.add_argument("--out", help="optional trace CSV output path")
    detect_p.set_defaults(func=cmd_detect)

    bench_p = sub.add_parser("benchmark", help="run a built-in four-generator case")
    bench_p.add_argument("--case", required=True, choices=CASE_IDS)
    bench_p.add_argument("--scenario", help="write the case's scenario file here")
    bench_p.add_argument("--out", help="trace CSV output path")
    bench_p.add_argument("--seed", type=int, default=0)
    bench_p.set_defaults(func=cmd_benchmark)

    sweep_p = sub.add_parser("sweep", help="re-run a scenario over a list of coupling gains")
    _scenario_args(sweep_p)
    sweep_p.add_argument("--beta", required=True,
                         help="comma-separated ascending positive gains")
    sweep_p.add_argument("--out", help="sweep CSV output path (default: stdout)")
    sweep_p.set_defaults(func=cmd_sweep)
    return parser


def _scenario_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--scenario", required=True, help="scenario file path")
    parser.add_argument("--seed", type=int, help="override the scenario's z seed")


def _load_scenario(args) -> sim.Scenario:
    scenario = parse_scenario_file(args.scenario)
    if args.seed is not None:
        scenario = replace(scenario, z_seed=args.seed)
    return scenario


def cmd_run(args) -> int:
    scenario = _load_scenario(args)
    trace = sim.run(scenario)
    columns = args.columns.split(",") if args.columns else None
    sim.write_trace_csv(trace, args.out, columns=columns)
    print(f"wrote {trace.times.size} samples to {args.out}")
    return 0


def cmd_verify(args) -> int:
    scenario = _load_scenario(args)
    trace = sim.run(scenario)
    report = analysis.verify_bounds(trace, scenario)
    print(report.format_text())
    return 0 if report.all_pass else 1


def cmd_detect(args) -> int:
    scenario = _load_scenario(args)
    settings = scenario.detection
    if not settings.enabled:
        raise ConfigurationError("scenario has detection disabled")
    trace = sim.run(scenario)
    if args.out:
        sim.write_trace_csv(trace, args.out)
    report = detection.detect(trace, settings.threshold, settings.dwell)

    outcomes = []
    post_lines = []
    if settings.auto_isolate and report.flagged_edges():
        topology = scenario.topology
        for edge in sorted(report.flagged_edges()):
            try:
                topology = detection.isolate(topology, edge)
                outcomes.append(detection.IsolationOutcome(
                    edge=edge, removed=True, connected_after=True))
            except detection.IsolationRefusedError as err:
                outcomes.append(detection.IsolationOutcome(
                    edge=edge, removed=False, connected_after=True, reason=str(err)))
        report = replace(report, isolations=tuple(outcomes))
        if any(o.removed for o in outcomes):
            rerun = sim.run(replace(scenario, topology=topology, link_attacks=tuple(
                link for link in scenario.link_attacks if topology.has_edge(*link.edge))))
            steady = analysis.steady_state(rerun, window=0.1 * scenario.horizon)
            post_lines.append("post_isolation_omega_mean: "
                              + " ".join(f"{v:.9g}" for v in steady.mean.omega))
            post_lines.append("post_isolation_mp_p_mean: "
                              + " ".join(f"{v:.9g}" for v in steady.mean.mp_p))
            post_lines.append(f"post_isolation_settled: {str(steady.settled).lower()}")

    print(report.format_text())
    for line in post_lines:
        print(line)

    expected = {tuple(sorted(link.edge)) for link in scenario.link_attacks
                if link.value != 0 and link.start_time <= scenario.horizon}
    return 0 if report.flagged_edges() == expected else 1


def cmd_benchmark(args) -> int:
    case = benchmark_case(args.case, seed=args.seed)
    if args.scenario:
        write_scenario_file(case.scenario, args.scenario)
        print(f"wrote scenario to {args.scenario}")
    runner = sim.run if case.use_auxiliary else sim.run_without_auxiliary
    trace = runner(case.scenario)
    if args.out:
        sim.write_trace_csv(trace, args.out)
        print(f"wrote {trace.times.size} samples to {args.out}")
    steady = analysis.steady_state(trace, window=0.1 * case.scenario.horizon)
    print(f"case: {args.case}")
    print(f"description: {case.description}")
    print("steady_omega: " + " ".join(f"{v:.9g}" for v in steady.mean.omega))
    print("steady_mp_p: " + " ".join(f"{v:.9g}" for v in steady.mean.mp_p))
    return 0


def cmd_sweep(args) -> int:
    scenario = _load_scenario(args)
    try:
        betas = [float(b) for b in args.beta.split(",") if b.strip()]
    except ValueError:
        raise ConfigurationError(f"could not parse beta list {args.beta!r}")
    rows = analysis.beta_sweep(scenario, betas)
    text = analysis.sweep_csv(rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioParseError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except DivergenceError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except (ConfigurationError, ShapeError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


def app() -> None:
    sys.exit(main())
