"""IEEE 9-bus line data and nominal power profile (two line-parameter sets),
plus the network description file format.

Bus numbers in files and in this table are 1-based.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
import yaml

from .errors import NetworkError
from .network import PowerNetwork

IEEE9_EDGES = ((1, 4), (4, 5), (5, 6), (3, 6), (6, 7), (7, 8), (8, 2), (8, 9), (9, 4))

IEEE9_WEIGHTS = {
    "ieee9_set1": (17.2376, 10.7036, 5.8484, 17.1069, 9.8343, 13.6459, 15.8972, 6.0142, 11.3837),
    "ieee9_set2": (8.4148, 10.6607, 9.9044, 10.1356, 12.2033, 10.6274, 13.6683, 9.5708, 11.3565),
}

# tabulated equilibrium angles (rad); the zero entry marks the reference bus
IEEE9_THETA = {
    "ieee9_set1": (0.1162, 0.2195, 0.1406, 0.0483, 0.0089, 0.0909, 0.0634, 0.1168, 0.0),
    "ieee9_set2": (0.1841, 0.1994, 0.1269, 0.0446, 0.0, 0.0429, 0.0163, 0.0799, 0.0009),
}

IEEE9_REFERENCE_BUS = {"ieee9_set1": 9, "ieee9_set2": 5}

IEEE9_P_O = (1.17, 1.63, 0.85, -0.2, -0.9, -0.1, -1.0, -0.2, -1.25)

IEEE9_D_RANGE = (0.7, 1.0)

BUILTINS = tuple(IEEE9_WEIGHTS)


def draw_d(n: int, lo: float, hi: float, seed: int) -> np.ndarray:
    """Uniform coefficients from a seeded counter-based generator."""
    if not 0 < lo <= hi:
        raise NetworkError(f"d range must satisfy 0 < lo <= hi, got [{lo}, {hi}]")
    rng = np.random.Generator(np.random.Philox(seed))
    return rng.uniform(lo, hi, n)


def ieee9(name: str = "ieee9_set1", d=None, *, seed: int | None = None, disturbance_buses=(1,)) -> PowerNetwork:
    """Builtin 9-bus network.

    ``d`` may be given explicitly; otherwise it is drawn from ``[0.7, 1]``
    with ``seed`` (a seed is mandatory in that case).
    """
    if name not in IEEE9_WEIGHTS:
        raise NetworkError(f"unknown builtin {name!r}; choose from {BUILTINS}")
    if d is None:
        if seed is None:
            raise NetworkError("a seed is required to draw d from its range")
        d = draw_d(9, *IEEE9_D_RANGE, seed)
    edges = tuple((i - 1, j - 1, a) for (i, j), a in zip(IEEE9_EDGES, IEEE9_WEIGHTS[name]))
    return PowerNetwork(9, edges, tuple(d), frozenset(b - 1 for b in disturbance_buses))


def ieee9_p_o() -> np.ndarray:
    return np.array(IEEE9_P_O)


def ieee9_theta(name: str) -> np.ndarray:
    return np.array(IEEE9_THETA[name])


# -- network description files ------------------------------------------------

def network_to_dict(net: PowerNetwork, p_o=None) -> dict:
    out = {
        "n": net.n,
        "edges": [[i + 1, j + 1, a] for i, j, a in net.edges],
        "d": list(net.d),
        "disturbance_nodes": sorted(k + 1 for k in net.disturbance_nodes),
    }
    if p_o is not None:
        out["p_o"] = [float(x) for x in p_o]
    return out


def network_from_dict(doc: dict, d=None) -> tuple[PowerNetwork, np.ndarray | None]:
    """Parse a network description; ``d`` overrides the file's coefficients."""
    try:
        n = int(doc["n"])
        edges = tuple((int(i) - 1, int(j) - 1, float(a)) for i, j, a in doc["edges"])
    except (KeyError, TypeError, ValueError) as exc:
        raise NetworkError(f"malformed network description: {exc}") from exc
    if d is None:
        if "d" not in doc:
            raise NetworkError("network description has no 'd' values and none were supplied")
        d = doc["d"]
    dist = frozenset(int(k) - 1 for k in doc.get("disturbance_nodes", []))
    p_o = np.array(doc["p_o"], dtype=float) if "p_o" in doc else None
    return PowerNetwork(n, edges, tuple(float(x) for x in d), dist), p_o


def load_network(path, d=None):
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    return network_from_dict(doc, d)


def save_network(path, net: PowerNetwork, p_o=None) -> None:
    Path(path).write_text(yaml.safe_dump(network_to_dict(net, p_o), sort_keys=False))
