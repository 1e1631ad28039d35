"""Line-oriented scenario file format.

A scenario file is a flat INI-like document with whitespace-separated
values. Node indices are 1-based in files and 0-based in memory.

    [topology]
    n 4
    edge 1 2
    edge 2 3
    pinning 1 0 0 0

    [control]
    beta 2.0
    omega_ref 314.0
    droop 0.002 0.002 0.003 0.003

    [init]
    omega 314 314 314 314
    power 6700 6700 4500 4500
    z_seed 0
    z_omega 0 0 0 0        # optional, overrides the seeded draw
    z_p 0 0 0 0            # optional

    [attacks]              # optional
    link frequency 1 4 -2.0 10.0        # target recv send value start [end]
    lti frequency 10.0                  # target start, then n F rows,
    F ...                               # n G rows and one d0 row
    G ...
    d0 ...

    [loads]                # optional: time then per-node watt deltas
    load 30.0 1100 1100 1100 1100

    [sim]
    step 0.001
    horizon 40.0

    [detection]            # optional, defaults to disabled
    enabled true
    threshold 0.001
    dwell 0.1
    auto_isolate true

Parsing is strict: unknown sections or keys, wrong arities and
out-of-range node indices are rejected with file/section/line
diagnostics. Blank lines and '#' comments are ignored.
"""

from __future__ import annotations

import numpy as np

from .attacks import TARGET_FREQUENCY, TARGET_POWER, LinkInjection, LtiAttack
from .controllers import ControlParams
from .exceptions import ScenarioParseError
from .graph import Topology
from .sim import DetectionSettings, LoadEvent, Scenario

_SECTIONS = ("topology", "control", "init", "attacks", "loads", "sim", "detection")
_REQUIRED = ("topology", "control", "init", "sim")
_TARGETS = (TARGET_FREQUENCY, TARGET_POWER)


def parse_scenario_file(path: str) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read(), source=str(path))


def parse_scenario(text: str, source: str = "<scenario>") -> Scenario:
    sections = _split_sections(text, source)
    for name in _REQUIRED:
        if name not in sections:
            raise ScenarioParseError(source, 0, name, "required section missing")

    n, edges, pinning = _parse_topology(sections["topology"], source)
    topology = _build(source, sections["topology"][0][0], "topology",
                      Topology.from_edges, n, edges, pinning)
    params = _parse_control(sections["control"], source, n)
    init = _parse_init(sections["init"], source, n)
    link_attacks, lti_attacks = _parse_attacks(sections.get("attacks", []), source, n)
    load_events = _parse_loads(sections.get("loads", []), source, n)
    step, horizon = _parse_sim(sections["sim"], source)
    detection = _parse_detection(sections.get("detection", []), source)

    first_line = sections["topology"][0][0]
    return _build(source, first_line, "topology", Scenario,
                  topology=topology, params=params,
                  omega0=init["omega"], power0=init["power"],
                  z_seed=init["z_seed"], z_omega0=init["z_omega"], z_p0=init["z_p"],
                  link_attacks=tuple(link_attacks), lti_attacks=tuple(lti_attacks),
                  load_events=tuple(load_events),
                  step=step, horizon=horizon, detection=detection)


def _build(source, line, section, factory, *args, **kwargs):
    """Run a constructor, converting its validation errors to parse errors."""
    try:
        return factory(*args, **kwargs)
    except ScenarioParseError:
        raise
    except Exception as err:
        raise ScenarioParseError(source, line, section, str(err)) from err


def _split_sections(text: str, source: str):
    sections: dict[str, list[tuple[int, list[str]]]] = {}
    current: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ScenarioParseError(source, lineno, current or "", "malformed section header")
            name = line[1:-1].strip()
            if name not in _SECTIONS:
                raise ScenarioParseError(source, lineno, name, "unknown section")
            if name in sections:
                raise ScenarioParseError(source, lineno, name, "duplicate section")
            sections[name] = []
            current = name
            continue
        if current is None:
            raise ScenarioParseError(source, lineno, "", "content before any section header")
        sections[current].append((lineno, line.split()))
    for name in sections:
        if not sections[name] and name in _REQUIRED:
            raise ScenarioParseError(source, 0, name, "section is empty")
    return sections


def _floats(tokens, source, lineno, section, expect=None):
    try:
        values = [float(t) for t in tokens]
    except ValueError:
        raise ScenarioParseError(source, lineno, section, f"expected numbers, got {tokens}")
    if expect is not None and len(values) != expect:
        raise ScenarioParseError(source, lineno, section,
                                 f"expected {expect} values, got {len(values)}")
    return values


def _node(token, source, lineno, section, n):
    try:
        idx = int(token)
    except ValueError:
        raise ScenarioParseError(source, lineno, section, f"expected a node index, got {token!r}")
    if not (1 <= idx <= n):
        raise ScenarioParseError(source, lineno, section,
                                 f"node index {idx} outside 1..{n}")
    return idx - 1


def _parse_topology(lines, source):
    n = None
    edges = []
    pinning = None
    section = "topology"
    for lineno, tokens in lines:
        key, rest = tokens[0], tokens[1:]
        if key == "n":
            n = int(_floats(rest, source, lineno, section, expect=1)[0])
            if n < 1:
                raise ScenarioParseError(source, lineno, section, f"n must be >= 1, got {n}")
        elif key == "edge":
            if n is None:
                raise ScenarioParseError(source, lineno, section, "n must precede edges")
            if len(rest) != 2:
                raise ScenarioParseError(source, lineno, section, "edge needs two node indices")
            i = _node(rest[0], source, lineno, section, n)
            j = _node(rest[1], source, lineno, section, n)
            if (i, j) in edges or (j, i) in edges:
                raise ScenarioParseError(source, lineno, section, f"duplicate edge {tokens[1:]}")
            edges.append((i, j))
        elif key == "pinning":
            if n is None:
                raise ScenarioParseError(source, lineno, section, "n must precede pinning")
            pinning = _floats(rest, source, lineno, section, expect=n)
        else:
            raise ScenarioParseError(source, lineno, section, f"unknown key {key!r}")
    if n is None:
        raise ScenarioParseError(source, lines[0][0], section, "missing key 'n'")
    if pinning is None:
        raise ScenarioParseError(source, lines[0][0], section, "missing key 'pinning'")
    return n, edges, pinning


def _parse_control(lines, source, n):
    values = _parse_keyed(lines, source, "control",
                          {"beta": 1, "omega_ref": 1, "droop": n},
                          required=("beta", "omega_ref", "droop"))
    return _build(source, lines[0][0], "control", ControlParams,
                  beta=values["beta"][0], omega_ref=values["omega_ref"][0],
                  droop=np.array(values["droop"]))


def _parse_init(lines, source, n):
    values = _parse_keyed(lines, source, "init",
                          {"omega": n, "power": n, "z_seed": 1, "z_omega": n, "z_p": n},
                          required=("omega", "power"))
    z_seed = int(values["z_seed"][0]) if "z_seed" in values else 0
    return {
        "omega": np.array(values["omega"]),
        "power": np.array(values["power"]),
        "z_seed": z_seed,
        "z_omega": np.array(values["z_omega"]) if "z_omega" in values else None,
        "z_p": np.array(values["z_p"]) if "z_p" in values else None,
    }


def _parse_keyed(lines, source, section, arities, required=()):
    values = {}
    for lineno, tokens in lines:
        key, rest = tokens[0], tokens[1:]
        if key not in arities:
            raise ScenarioParseError(source, lineno, section, f"unknown key {key!r}")
        if key in values:
            raise ScenarioParseError(source, lineno, section, f"duplicate key {key!r}")
        values[key] = _floats(rest, source, lineno, section, expect=arities[key])
    for key in required:
        if key not in values:
            raise ScenarioParseError(source, lines[0][0] if lines else 0, section,
                                     f"missing key {key!r}")
    return values


def _parse_target(token, source, lineno, section):
    if token not in _TARGETS:
        raise ScenarioParseError(source, lineno, section,
                                 f"target must be one of {_TARGETS}, got {token!r}")
    return token


def _parse_attacks(lines, source, n):
    section = "attacks"
    links = []
    ltis = []
    idx = 0
    while idx < len(lines):
        lineno, tokens = lines[idx]
        key = tokens[0]
        if key == "link":
            if len(tokens) not in (6, 7):
                raise ScenarioParseError(source, lineno, section,
                                         "link needs: target recv send value start [end]")
            target = _parse_target(tokens[1], source, lineno, section)
            i = _node(tokens[2], source, lineno, section, n)
            j = _node(tokens[3], source, lineno, section, n)
            value, start = _floats(tokens[4:6], source, lineno, section, expect=2)
            end = _floats(tokens[6:7], source, lineno, section, expect=1)[0] \
                if len(tokens) == 7 else None
            links.append(_build(source, lineno, section, LinkInjection,
                                edge=(i, j), target=target, value=value,
                                start_time=start, end_time=end))
            idx += 1
        elif key == "lti":
            if len(tokens) != 3:
                raise ScenarioParseError(source, lineno, section, "lti needs: target start")
            target = _parse_target(tokens[1], source, lineno, section)
            start = _floats(tokens[2:3], source, lineno, section, expect=1)[0]
            rows = {"F": [], "G": [], "d0": []}
            idx += 1
            want = ["F"] * n + ["G"] * n + ["d0"]
            for expected in want:
                if idx >= len(lines):
                    raise ScenarioParseError(source, lineno, section,
                                             f"lti block truncated, expected a {expected} row")
                row_lineno, row_tokens = lines[idx]
                if row_tokens[0] != expected:
                    raise ScenarioParseError(source, row_lineno, section,
                                             f"expected {expected} row, got {row_tokens[0]!r}")
                rows[expected].append(
                    _floats(row_tokens[1:], source, row_lineno, section, expect=n))
                idx += 1
            ltis.append(_build(source, lineno, section, LtiAttack,
                               target=target, F=np.array(rows["F"]),
                               G=np.array(rows["G"]), d0=np.array(rows["d0"][0]),
                               start_time=start))
        else:
            raise ScenarioParseError(source, lineno, section, f"unknown key {key!r}")
    return links, ltis


def _parse_loads(lines, source, n):
    events = []
    for lineno, tokens in lines:
        if tokens[0] != "load":
            raise ScenarioParseError(source, lineno, "loads", f"unknown key {tokens[0]!r}")
        values = _floats(tokens[1:], source, lineno, "loads", expect=n + 1)
        events.append(_build(source, lineno, "loads", LoadEvent,
                             time=values[0], deltas=np.array(values[1:])))
    return events


def _parse_sim(lines, source):
    values = _parse_keyed(lines, source, "sim", {"step": 1, "horizon": 1},
                          required=("step", "horizon"))
    return values["step"][0], values["horizon"][0]


def _parse_detection(lines, source):
    if not lines:
        return DetectionSettings()
    section = "detection"
    known = {"enabled", "threshold", "dwell", "auto_isolate"}
    values = {}
    for lineno, tokens in lines:
        key, rest = tokens[0], tokens[1:]
        if key not in known:
            raise ScenarioParseError(source, lineno, section, f"unknown key {key!r}")
        if key in values:
            raise ScenarioParseError(source, lineno, section, f"duplicate key {key!r}")
        if len(rest) != 1:
            raise ScenarioParseError(source, lineno, section, f"{key} takes one value")
        if key in ("enabled", "auto_isolate"):
            if rest[0] not in ("true", "false"):
                raise ScenarioParseError(source, lineno, section,
                                         f"{key} must be true or false, got {rest[0]!r}")
            values[key] = rest[0] == "true"
        else:
            values[key] = _floats(rest, source, lineno, section, expect=1)[0]
    defaults = DetectionSettings()
    return _build(source, lines[0][0], section, DetectionSettings,
                  enabled=values.get("enabled", defaults.enabled),
                  threshold=values.get("threshold", defaults.threshold),
                  dwell=values.get("dwell", defaults.dwell),
                  auto_isolate=values.get("auto_isolate", defaults.auto_isolate))


def format_scenario(scenario: Scenario) -> str:
    """Canonical text form; parsing it back yields an equal Scenario."""
    if scenario.isolation_events:
        raise ValueError("scheduled isolation events have no file representation")
    top = scenario.topology
    out = ["[topology]", f"n {top.n}"]
    out += [f"edge {i + 1} {j + 1}" for i, j in top.edges()]
    out.append("pinning " + _join(top.pinning))

    p = scenario.params
    out += ["", "[control]", f"beta {p.beta!r}", f"omega_ref {p.omega_ref!r}",
            "droop " + _join(p.droop)]

    out += ["", "[init]", "omega " + _join(scenario.omega0),
            "power " + _join(scenario.power0), f"z_seed {scenario.z_seed}"]
    if scenario.z_omega0 is not None:
        out.append("z_omega " + _join(scenario.z_omega0))
    if scenario.z_p0 is not None:
        out.append("z_p " + _join(scenario.z_p0))

    if scenario.link_attacks or scenario.lti_attacks:
        out += ["", "[attacks]"]
        for link in scenario.link_attacks:
            line = (f"link {link.target} {link.receiver + 1} {link.sender + 1} "
                    f"{link.value!r} {link.start_time!r}")
            if link.end_time is not None:
                line += f" {link.end_time!r}"
            out.append(line)
        for atk in scenario.lti_attacks:
            out.append(f"lti {atk.target} {atk.start_time!r}")
            out += [f"F {_join(row)}" for row in atk.F]
            out += [f"G {_join(row)}" for row in atk.G]
            out.append(f"d0 {_join(atk.d0)}")

    if scenario.load_events:
        out += ["", "[loads]"]
        out += [f"load {event.time!r} {_join(event.deltas)}" for event in scenario.load_events]

    out += ["", "[sim]", f"step {scenario.step!r}", f"horizon {scenario.horizon!r}"]

    det = scenario.detection
    if det != DetectionSettings():
        out += ["", "[detection]",
                f"enabled {str(det.enabled).lower()}",
                f"threshold {det.threshold!r}",
                f"dwell {det.dwell!r}",
                f"auto_isolate {str(det.auto_isolate).lower()}"]
    return "\n".join(out) + "\n"


def write_scenario_file(scenario: Scenario, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_scenario(scenario))


def _join(values) -> str:
    return " ".join(repr(float(v)) for v in values)
