"""Scenario files: INI sections parsed into a :class:`ScenarioConfig`.

Example::

    [scenario]
    name = paper_obj1
    objective = I            ; I, II or III
    step = 1e-3              ; s
    duration = 10            ; s
    coupling = solve         ; solve or lagged (objectives II/III)
    consensus_threshold = 1  ; deg

    [graph]
    directed = false
    edges = 1-2, 2-3, 3-4    ; agents are 1..n, 0 is the reference

    [gains]
    Kp = 1
    Kd = 2
    alpha = 1                ; one value, or one per agent
    P = 1, 1, 1              ; diagonal error weights

    [agents]
    count = 4
    inertia = 0.23, 0.28, 0.35   ; kg m^2, diagonal or 9 row-major entries
    euler.1 = 20, 20, 20         ; roll, pitch, yaw in deg (Z-Y-X)
    omega.1 = 1, 1, 1            ; body rates in deg/s

    [reference]              ; objective III only
    amplitude = 10           ; deg/s
    period = 8               ; s
    euler0 = 0, 0, 0         ; deg

Keys are case-insensitive. Missing agents default to identity attitude and
zero rate.
"""
import configparser
from pathlib import Path

import numpy as np

from .controllers import ControllerGains
from .graph import CommGraph, GraphError
from .lie import from_euler_zyx
from .simulator import InertiaTensor, ReferenceTrajectory, ScenarioConfig

SCHEMA = {
    "scenario": {"name", "objective", "step", "duration", "coupling", "consensus_threshold"},
    "graph": {"directed", "edges"},
    "gains": {"kp", "kd", "alpha", "p"},
    "agents": {"count", "inertia"},
    "reference": {"amplitude", "period", "euler0"},
}
REQUIRED = {"scenario": {"objective"}, "graph": {"edges"}, "gains": {"kp", "kd"}, "agents": {"count"}}


class ConfigError(Exception):
    """Base class; ``exit_code`` is what the CLI returns."""

    exit_code = 4


class MissingFileError(ConfigError):
    exit_code = 3


class SchemaError(ConfigError):
    exit_code = 4


def parse_override(text):
    """Split ``section.key=value`` into ``(section, key, value)``."""
    key, sep, value = text.partition("=")
    section, dot, name = key.strip().partition(".")
    if not sep or not dot or not section or not name:
        raise SchemaError(f"override must look like section.key=value, got {text!r}")
    return section.strip().lower(), name.strip().lower(), value.strip()


def read_config(path, overrides=()):
    """Read an INI file and apply ``--set`` style overrides.

    Returns:
        ``configparser.ConfigParser`` with lower-cased keys.

    Raises:
        MissingFileError: if ``path`` does not exist.
        SchemaError: on syntax errors or malformed overrides.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read(path)
    except configparser.Error as err:
        raise SchemaError(f"{path}: {err}") from err
    for text in overrides:
        section, key, value = parse_override(text)
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key, value)
    return parser


def _floats(text, what, count=None):
    try:
        values = [float(v) for v in text.replace(",", " ").split()]
    except ValueError as err:
        raise SchemaError(f"{what}: expected numbers, got {text!r}") from err
    if count is not None and len(values) not in np.atleast_1d(count):
        raise SchemaError(f"{what}: expected {count} values, got {len(values)}")
    if not all(np.isfinite(values)):
        raise SchemaError(f"{what}: values must be finite")
    return values


def _float(section, key, default=None):
    if key not in section:
        return default
    return _floats(section[key], f"[{section.name}] {key}", 1)[0]


def _bool(section, key, default=False):
    if key not in section:
        return default
    try:
        return section.getboolean(key)
    except ValueError as err:
        raise SchemaError(f"[{section.name}] {key}: expected true/false") from err


def _check_schema(parser):
    for name in parser.sections():
        if name not in SCHEMA:
            raise SchemaError(f"unknown section [{name}]")
        for key in parser[name]:
            known = key in SCHEMA[name] or (
                name == "agents" and key.partition(".")[0] in ("euler", "omega")
            )
            if not known:
                raise SchemaError(f"unknown key '{key}' in [{name}]")
    for name, keys in REQUIRED.items():
        if not parser.has_section(name):
            raise SchemaError(f"missing section [{name}]")
        for key in keys:
            if key not in parser[name]:
                raise SchemaError(f"missing key '{key}' in [{name}]")


def parse_edges(text, n, directed):
    """``"0-1, 1-2"`` (1-based agents, 0 = reference) -> CommGraph.

    Raises:
        SchemaError: on malformed tokens.
        GraphError: on unknown nodes or self-loops.
    """
    pairs = []
    for token in text.replace(";", ",").split(","):
        token = token.strip()
        if not token:
            continue
        a, sep, b = token.partition("-")
        try:
            if not sep:
                raise ValueError
            src, dst = int(a), int(b)
        except ValueError as err:
            raise SchemaError(f"edge {token!r}: expected 'a-b' with integer ids") from err
        pairs.append((src, dst))
    uses_ref = any(0 in p for p in pairs)
    for src, dst in pairs:
        for node in (src, dst):
            if not 0 <= node <= n:
                raise GraphError(f"edge {src}-{dst}: node {node} outside 0..{n}")
    if uses_ref and not directed:
        raise GraphError("the reference node 0 can only appear in a directed graph")

    def index(node):
        return n if node == 0 else node - 1

    edges = [(index(s), index(d)) for s, d in pairs]
    return CommGraph.from_edges(n, edges, directed=directed, with_reference=uses_ref)


def build_scenario(parser, name=None):
    """Turn a parsed config into a validated :class:`ScenarioConfig`.

    Raises:
        SchemaError: on missing/unknown keys or bad values.
        GraphError: if the graph is malformed or fails the objective's check.
    """
    _check_schema(parser)
    sc, gr, ga, ag = (parser[s] for s in ("scenario", "graph", "gains", "agents"))
    objective = sc["objective"].strip().upper()
    count = _float(ag, "count")
    if count != int(count) or count < 1:
        raise SchemaError("[agents] count must be a positive integer")
    n = int(count)

    inertia = _floats(ag.get("inertia", "0.23, 0.28, 0.35"), "[agents] inertia", (3, 9))
    try:
        J = InertiaTensor(np.array(inertia).reshape(3, 3) if len(inertia) == 9 else inertia)
    except ValueError as err:
        raise SchemaError(f"[agents] inertia: {err}") from err

    R0 = np.empty((n, 3, 3))
    W0 = np.zeros((n, 3))
    for k in range(1, n + 1):
        angles = _floats(ag.get(f"euler.{k}", "0, 0, 0"), f"[agents] euler.{k}", 3)
        R0[k - 1] = from_euler_zyx(*np.deg2rad(angles))
        W0[k - 1] = np.deg2rad(_floats(ag.get(f"omega.{k}", "0, 0, 0"), f"[agents] omega.{k}", 3))
    for key in ag:
        prefix, _, idx = key.partition(".")
        if prefix in ("euler", "omega") and not (idx.isdigit() and 1 <= int(idx) <= n):
            raise SchemaError(f"[agents] {key}: agent id must be in 1..{n}")

    alpha = _floats(ga.get("alpha", "1"), "[gains] alpha", (1, n))
    try:
        gains = ControllerGains(
            Kp=_float(ga, "kp"),
            Kd=_float(ga, "kd"),
            alpha=alpha[0] if len(alpha) == 1 else np.array(alpha),
            P=_floats(ga.get("p", "1, 1, 1"), "[gains] P", 3),
        )
    except ValueError as err:
        raise SchemaError(f"[gains] {err}") from err

    graph = parse_edges(gr["edges"], n, _bool(gr, "directed"))

    reference = None
    if objective == "III":
        if not parser.has_section("reference"):
            parser.add_section("reference")
        rf = parser["reference"]
        euler0 = _floats(rf.get("euler0", "0, 0, 0"), "[reference] euler0", 3)
        period = _float(rf, "period", 8.0)
        if not period > 0:
            raise SchemaError("[reference] period must be > 0")
        reference = ReferenceTrajectory(
            amplitude=np.deg2rad(_float(rf, "amplitude", 10.0)),
            period=period,
            R0=from_euler_zyx(*np.deg2rad(euler0)),
        )

    cfg = ScenarioConfig(
        objective=objective,
        graph=graph,
        gains=gains,
        R0=R0,
        omega0=W0,
        inertia=J,
        step=_float(sc, "step", 1e-3),
        duration=_float(sc, "duration", 10.0),
        reference=reference,
        coupling=sc.get("coupling", "solve").strip().lower(),
        name=sc.get("name", name or "scenario").strip(),
        consensus_threshold=np.deg2rad(_float(sc, "consensus_threshold", 1.0)),
    )
    try:
        cfg.validate()
    except GraphError:
        raise
    except ValueError as err:
        raise SchemaError(str(err)) from err
    return cfg


def load_scenario(path, overrides=()):
    """Read, override and validate a scenario file."""
    parser = read_config(path, overrides)
    return build_scenario(parser, name=Path(path).stem)


def effective_config(parser):
    """Nested dict of the final (post-override) raw string values."""
    return {s: dict(parser[s]) for s in parser.sections()}
