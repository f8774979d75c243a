"""Experiment configuration: parsing, validation with line-addressed
diagnostics, round-trip serialisation and resolution into model objects.

Bus numbers in a config are 1-based, as in the tables.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import data
from .errors import ConfigError, KurasyncError
from .network import PowerNetwork

CERTIFICATES = ("I", "I-original", "II", "roa_I", "roa_II")
RECLOSE_RULES = ("on_C1_and_C2", "never")
BALANCE_TOL = 1e-9
GRID_TOL = 1e-9


@dataclass(frozen=True)
class Diagnostic:
    path: str
    message: str
    line: int | None = None

    def __str__(self):
        where = f"line {self.line}: " if self.line else ""
        return f"{where}{self.path or '<root>'}: {self.message}"


@dataclass(frozen=True)
class NetworkSpec:
    builtin: str | None = None
    file: str | None = None
    inline: dict | None = None


@dataclass(frozen=True)
class DSpec:
    values: tuple | None = None
    range: tuple | None = None
    seed: int | None = None


@dataclass(frozen=True)
class EquilibriumSpec:
    reference_bus: int | None = None
    reference_angle: float = 0.0


@dataclass(frozen=True)
class DisturbanceConfig:
    buses: tuple
    p_d: float
    hold_interval: float = 0.1
    seed: int = 0
    start_time: float = 5.0


@dataclass(frozen=True)
class TripConfig:
    line: tuple
    time: float = 5.0
    reclose: str = "on_C1_and_C2"
    reclose_time: float | None = None


@dataclass(frozen=True)
class SimConfig:
    horizon: float = 20.0
    step: float = 1e-3


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    csv_every: int = 1


@dataclass(frozen=True)
class ExperimentConfig:
    network: NetworkSpec
    d: DSpec = field(default_factory=DSpec)
    equilibrium: EquilibriumSpec = field(default_factory=EquilibriumSpec)
    disturbance: DisturbanceConfig | None = None
    trip: TripConfig | None = None
    certificates: tuple = ()
    sim: SimConfig = field(default_factory=SimConfig)
    output: OutputConfig = field(default_factory=OutputConfig)


# -- YAML positions -----------------------------------------------------------

def _line_map(text: str) -> dict:
    """Maps key paths (tuples of keys / indices) to 1-based source lines."""
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return {}
    lines = {}

    def walk(node, path):
        lines[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                walk(v, path + (k.value,))
                lines[path + (k.value,)] = k.start_mark.line + 1
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                walk(v, path + (i,))

    if root is not None:
        walk(root, ())
    return lines


class _Collector:
    def __init__(self, lines):
        self.lines = lines
        self.items: list[Diagnostic] = []

    def add(self, path: tuple, message: str):
        line = None
        for k in range(len(path), -1, -1):
            if path[:k] in self.lines:
                line = self.lines[path[:k]]
                break
        self.items.append(Diagnostic(".".join(str(p) for p in path), message, line))


# -- parsing ------------------------------------------------------------------

_SECTIONS = {
    "network": ("builtin", "file", "inline"),
    "d": ("values", "range", "seed"),
    "equilibrium": ("reference_bus", "reference_angle"),
    "disturbance": ("buses", "p_d", "hold_interval", "seed", "start_time"),
    "trip": ("line", "time", "reclose"),
    "sim": ("horizon", "step"),
    "output": ("directory", "csv_every"),
}
_TOP = tuple(_SECTIONS) + ("certificates",)


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _on_grid(t, h):
    k = round(t / h)
    return abs(k * h - t) <= GRID_TOL * max(1.0, abs(t))


def _network_shape(net_doc, diag, base_dir):
    """Returns ``(n, edge pairs, p_o or None, file d or None)`` for semantic checks."""
    if "builtin" in net_doc:
        name = net_doc["builtin"]
        if name not in data.BUILTINS:
            diag.add(("network", "builtin"), f"unknown builtin {name!r}; choose from {', '.join(data.BUILTINS)}")
            return None
        pairs = {frozenset((i, j)) for i, j in data.IEEE9_EDGES}
        return 9, pairs, data.ieee9_p_o(), None
    if "file" in net_doc:
        path = Path(net_doc["file"])
        if not path.is_absolute() and base_dir is not None:
            path = Path(base_dir) / path
        try:
            doc = yaml.safe_load(path.read_text())
        except (OSError, yaml.YAMLError) as exc:
            diag.add(("network", "file"), f"cannot read network file: {exc}")
            return None
        return _inline_shape(doc, diag, ("network", "file"))
    return _inline_shape(net_doc["inline"], diag, ("network", "inline"))


def _inline_shape(doc, diag, where):
    if not isinstance(doc, dict):
        diag.add(where, "network description must be a mapping")
        return None
    n = doc.get("n")
    if not _is_int(n) or n < 2:
        diag.add(where + ("n",), "node count must be an integer >= 2")
        return None
    pairs = set()
    edges = doc.get("edges")
    if not isinstance(edges, list) or not edges:
        diag.add(where + ("edges",), "edges must be a non-empty list of [i, j, a_ij]")
        edges = []
    for k, e in enumerate(edges):
        p = where + ("edges", k)
        if not (isinstance(e, list) and len(e) == 3 and _is_int(e[0]) and _is_int(e[1]) and _is_num(e[2])):
            diag.add(p, "edge must be [i, j, a_ij] with integer buses")
            continue
        i, j, a = e
        for b in (i, j):
            if not 1 <= b <= n:
                diag.add(p, f"bus {b} outside 1..{n}")
        if i == j:
            diag.add(p, "self-loop")
        if a <= 0:
            diag.add(p, f"weight must be positive, got {a}")
        key = frozenset((i, j))
        if key in pairs:
            diag.add(p, f"duplicate line {i}-{j}")
        pairs.add(key)
    p_o = doc.get("p_o")
    if p_o is not None:
        if not (isinstance(p_o, list) and len(p_o) == n and all(_is_num(v) for v in p_o)):
            diag.add(where + ("p_o",), f"p_o must list {n} numbers")
            p_o = None
        else:
            p_o = np.array(p_o, float)
    d = doc.get("d")
    for k, b in enumerate(doc.get("disturbance_nodes", []) or []):
        if not (_is_int(b) and 1 <= b <= n):
            diag.add(where + ("disturbance_nodes", k), f"bus must be in 1..{n}")
    return n, pairs, p_o, d


def validate_text(text: str, base_dir=None) -> list[Diagnostic]:
    """All structural and semantic problems in a config, without side effects."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        return [Diagnostic("", f"YAML syntax error: {getattr(exc, 'problem', exc)}", mark.line + 1 if mark else None)]
    diag = _Collector(_line_map(text))
    _validate_doc(doc, diag, base_dir)
    return diag.items


def _validate_doc(doc, diag, base_dir):
    if not isinstance(doc, dict):
        diag.add((), "config must be a mapping")
        return
    for key in doc:
        if key not in _TOP:
            diag.add((key,), f"unknown section; expected one of {', '.join(_TOP)}")
    for sec, keys in _SECTIONS.items():
        body = doc.get(sec)
        if body is None:
            continue
        if not isinstance(body, dict):
            diag.add((sec,), "must be a mapping")
            continue
        for key in body:
            if key not in keys:
                diag.add((sec, key), f"unknown field; expected one of {', '.join(keys)}")

    net_doc = doc.get("network")
    shape = None
    if not isinstance(net_doc, dict):
        diag.add(("network",), "required section missing")
    else:
        chosen = [k for k in ("builtin", "file", "inline") if k in net_doc]
        if len(chosen) != 1:
            diag.add(("network",), "give exactly one of builtin, file, inline")
        else:
            shape = _network_shape(net_doc, diag, base_dir)
    n = shape[0] if shape else None
    edge_pairs = shape[1] if shape else set()
    p_o = shape[2] if shape else None
    file_d = shape[3] if shape else None

    if shape is not None:
        if p_o is None:
            diag.add(("network",), "no power profile p_o")
        elif abs(float(np.sum(p_o))) > BALANCE_TOL:
            diag.add(("network",), f"power profile is unbalanced: sum(p_o) = {float(np.sum(p_o)):.3g}; the power-flow equation needs e^T p_o = 0")

    d_doc = doc.get("d") or {}
    if isinstance(d_doc, dict):
        if "values" in d_doc and "range" in d_doc:
            diag.add(("d",), "give either values or range, not both")
        if "values" in d_doc:
            vals = d_doc["values"]
            if not (isinstance(vals, list) and all(_is_num(v) and v > 0 for v in vals)):
                diag.add(("d", "values"), "values must be positive numbers")
            elif n is not None and len(vals) != n:
                diag.add(("d", "values"), f"expected {n} values, got {len(vals)}")
        elif "range" in d_doc:
            rng = d_doc["range"]
            if not (isinstance(rng, list) and len(rng) == 2 and all(_is_num(v) for v in rng) and 0 < rng[0] <= rng[1]):
                diag.add(("d", "range"), "range must be [lo, hi] with 0 < lo <= hi")
            if "seed" not in d_doc:
                diag.add(("d",), "a d range requires a seed")
        elif file_d is None and n is not None:
            if "seed" not in d_doc:
                diag.add(("d",), "no d values available; give values, or a range and seed (a seed alone uses [0.7, 1])")
        if "seed" in d_doc and not (_is_int(d_doc["seed"]) and d_doc["seed"] >= 0):
            diag.add(("d", "seed"), "seed must be a non-negative integer")

    eq_doc = doc.get("equilibrium") or {}
    if isinstance(eq_doc, dict):
        rb = eq_doc.get("reference_bus")
        if rb is not None and not (_is_int(rb) and n is not None and 1 <= rb <= n):
            diag.add(("equilibrium", "reference_bus"), f"must be a bus in 1..{n}")
        ra = eq_doc.get("reference_angle", 0.0)
        if not _is_num(ra):
            diag.add(("equilibrium", "reference_angle"), "must be a number")

    sim = doc.get("sim") or {}
    h = 1e-3
    if isinstance(sim, dict):
        h = sim.get("step", 1e-3)
        if not (_is_num(h) and h > 0):
            diag.add(("sim", "step"), "step must be positive")
            h = None
        hz = sim.get("horizon", 20.0)
        if not (_is_num(hz) and hz > 0):
            diag.add(("sim", "horizon"), "horizon must be positive")
        elif h is not None and not _on_grid(hz, h):
            diag.add(("sim", "horizon"), f"horizon {hz} is not a multiple of the step {h}")

    dist = doc.get("disturbance")
    if isinstance(dist, dict):
        buses = dist.get("buses")
        if not (isinstance(buses, list) and buses):
            diag.add(("disturbance", "buses"), "buses must be a non-empty list")
        else:
            for k, b in enumerate(buses):
                if not (_is_int(b) and n is not None and 1 <= b <= n):
                    diag.add(("disturbance", "buses", k), f"bus must be in 1..{n}")
            if len(buses) > 12:
                diag.add(("disturbance", "buses"), "at most 12 disturbance buses")
        pd = dist.get("p_d")
        if not (_is_num(pd) and pd >= 0):
            diag.add(("disturbance", "p_d"), "p_d must be a non-negative number")
        hold = dist.get("hold_interval", 0.1)
        if not (_is_num(hold) and hold > 0):
            diag.add(("disturbance", "hold_interval"), "hold_interval must be positive")
        elif h is not None and not _on_grid(hold, h):
            diag.add(("disturbance", "hold_interval"), f"the step {h} does not divide hold_interval {hold}")
        st = dist.get("start_time", 5.0)
        if not (_is_num(st) and st >= 0):
            diag.add(("disturbance", "start_time"), "start_time must be non-negative")
        elif h is not None and not _on_grid(st, h):
            diag.add(("disturbance", "start_time"), "start_time is not on the step grid")
        if "seed" in dist and not (_is_int(dist["seed"]) and dist["seed"] >= 0):
            diag.add(("disturbance", "seed"), "seed must be a non-negative integer")

    trip = doc.get("trip")
    if isinstance(trip, dict):
        line = trip.get("line")
        if not (isinstance(line, list) and len(line) == 2 and all(_is_int(b) for b in line)):
            diag.add(("trip", "line"), "line must be [i, j]")
        elif shape is not None and frozenset(line) not in edge_pairs:
            diag.add(("trip", "line"), f"{line[0]}-{line[1]} is not a line of the network")
        t = trip.get("time", 5.0)
        if not (_is_num(t) and t >= 0):
            diag.add(("trip", "time"), "time must be non-negative")
        elif h is not None and not _on_grid(t, h):
            diag.add(("trip", "time"), "trip time is not on the step grid")
        rule = trip.get("reclose", "on_C1_and_C2")
        if isinstance(rule, dict):
            rt = rule.get("at_time")
            if set(rule) != {"at_time"} or not _is_num(rt):
                diag.add(("trip", "reclose"), "expected {at_time: <seconds>}")
            elif _is_num(t) and rt < t:
                diag.add(("trip", "reclose", "at_time"), "reclose time precedes the trip")
            elif h is not None and not _on_grid(rt, h):
                diag.add(("trip", "reclose", "at_time"), "reclose time is not on the step grid")
        elif rule not in RECLOSE_RULES:
            diag.add(("trip", "reclose"), f"reclose must be one of {', '.join(RECLOSE_RULES)} or {{at_time: t}}")

    certs = doc.get("certificates", [])
    if not isinstance(certs, list):
        diag.add(("certificates",), "must be a list")
    else:
        for k, c in enumerate(certs):
            if c not in CERTIFICATES:
                diag.add(("certificates", k), f"unknown certificate {c!r}; choose from {', '.join(CERTIFICATES)}")

    out = doc.get("output") or {}
    if isinstance(out, dict):
        if "directory" in out and not isinstance(out["directory"], str):
            diag.add(("output", "directory"), "must be a string")
        every = out.get("csv_every", 1)
        if not (_is_int(every) and every >= 1):
            diag.add(("output", "csv_every"), "csv_every must be a positive integer")


def from_dict(doc: dict) -> ExperimentConfig:
    """Builds the typed config from an already validated document."""
    net = doc["network"]
    inline = net.get("inline")
    d = doc.get("d") or {}
    eq = doc.get("equilibrium") or {}
    dist = doc.get("disturbance")
    trip = doc.get("trip")
    sim = doc.get("sim") or {}
    out = doc.get("output") or {}
    trip_cfg = None
    if trip is not None:
        rule = trip.get("reclose", "on_C1_and_C2")
        rt = None
        if isinstance(rule, dict):
            rule, rt = "at_time", float(rule["at_time"])
        trip_cfg = TripConfig(tuple(trip["line"]), float(trip.get("time", 5.0)), rule, rt)
    return ExperimentConfig(
        network=NetworkSpec(net.get("builtin"), net.get("file"), inline),
        d=DSpec(
            tuple(float(v) for v in d["values"]) if "values" in d else None,
            tuple(float(v) for v in d["range"]) if "range" in d else None,
            d.get("seed"),
        ),
        equilibrium=EquilibriumSpec(eq.get("reference_bus"), float(eq.get("reference_angle", 0.0))),
        disturbance=None if dist is None else DisturbanceConfig(
            tuple(dist["buses"]), float(dist["p_d"]), float(dist.get("hold_interval", 0.1)),
            int(dist.get("seed", 0)), float(dist.get("start_time", 5.0)),
        ),
        trip=trip_cfg,
        certificates=tuple(doc.get("certificates", [])),
        sim=SimConfig(float(sim.get("horizon", 20.0)), float(sim.get("step", 1e-3))),
        output=OutputConfig(str(out.get("directory", "out")), int(out.get("csv_every", 1))),
    )


def parse_config(text: str, base_dir=None) -> ExperimentConfig:
    diags = validate_text(text, base_dir)
    if diags:
        raise ConfigError(diags)
    return from_dict(yaml.safe_load(text))


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(), base_dir=path.parent)


def to_dict(cfg: ExperimentConfig) -> dict:
    net = {k: v for k, v in asdict(cfg.network).items() if v is not None}
    out = {"network": net}
    d = {}
    if cfg.d.values is not None:
        d["values"] = list(cfg.d.values)
    if cfg.d.range is not None:
        d["range"] = list(cfg.d.range)
    if cfg.d.seed is not None:
        d["seed"] = cfg.d.seed
    if d:
        out["d"] = d
    eq = {"reference_angle": cfg.equilibrium.reference_angle}
    if cfg.equilibrium.reference_bus is not None:
        eq["reference_bus"] = cfg.equilibrium.reference_bus
    out["equilibrium"] = eq
    if cfg.disturbance is not None:
        dist = asdict(cfg.disturbance)
        dist["buses"] = list(dist["buses"])
        out["disturbance"] = dist
    if cfg.trip is not None:
        rule = {"at_time": cfg.trip.reclose_time} if cfg.trip.reclose == "at_time" else cfg.trip.reclose
        out["trip"] = {"line": list(cfg.trip.line), "time": cfg.trip.time, "reclose": rule}
    out["certificates"] = list(cfg.certificates)
    out["sim"] = asdict(cfg.sim)
    out["output"] = asdict(cfg.output)
    return out


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=False)


# -- resolution ---------------------------------------------------------------

@dataclass(frozen=True)
class Resolved:
    net: PowerNetwork
    p_o: np.ndarray
    reference_node: int
    reference_angle: float
    d_seed: int | None


def resolve(cfg: ExperimentConfig, base_dir=None, seed: int | None = None) -> Resolved:
    """Builds the network; ``seed`` overrides the d seed when d is drawn."""
    d_seed = cfg.d.seed if seed is None else seed
    dist_buses = cfg.disturbance.buses if cfg.disturbance else ()
    spec = cfg.network

    def draw(n):
        if cfg.d.values is not None:
            return np.array(cfg.d.values)
        lo, hi = cfg.d.range if cfg.d.range is not None else data.IEEE9_D_RANGE
        if d_seed is None:
            return None
        return data.draw_d(n, lo, hi, d_seed)

    if spec.builtin is not None:
        net = data.ieee9(spec.builtin, draw(9), disturbance_buses=dist_buses)
        p_o = data.ieee9_p_o()
        ref = cfg.equilibrium.reference_bus or data.IEEE9_REFERENCE_BUS[spec.builtin]
    else:
        if spec.file is not None:
            path = Path(spec.file)
            if not path.is_absolute() and base_dir is not None:
                path = Path(base_dir) / path
            doc = yaml.safe_load(path.read_text())
        else:
            doc = spec.inline
        n = int(doc["n"])
        net, p_o = data.network_from_dict(doc, draw(n))
        if dist_buses:
            net = PowerNetwork(net.n, net.edges, net.d, frozenset(b - 1 for b in dist_buses))
        ref = cfg.equilibrium.reference_bus or 1
    if p_o is None:
        raise KurasyncError("network has no power profile")
    return Resolved(net, p_o, ref - 1, cfg.equilibrium.reference_angle, d_seed)
