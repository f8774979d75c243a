"""Fixed-step simulation of the deviation dynamics, disturbance and line-trip
scenarios, and boundary-crossing detection.

Every run is a deterministic function of its inputs: the integrator is
classic RK4 on a uniform grid, disturbance switch times must fall on that
grid, and disturbance values come from a counter-based generator keyed by
``(seed, node)``.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import energy
from .certificates import CertificateReport, RoaResult, weighting_c, weighting_l
from .equilibrium import Equilibrium
from .errors import KurasyncError, SimulationDiverged
from .kernel import rk4_advance
from .network import IncidencePair, PowerNetwork, build_incidence

log = logging.getLogger(__name__)

DEFAULT_STEP = 1e-3
SETTLE_TOL = 1e-8
GRID_TOL = 1e-9
CSV_VERSION = "kurasync-trajectory v1"
# per-step slack for integration error when checking that V does not increase
MONOTONE_RTOL = 1e-9
MONOTONE_ATOL = 1e-15


# -- norms --------------------------------------------------------------------

def norm_c(X) -> np.ndarray:
    """``||B_c^T x||`` for rows of ``X`` via ``n sum x^2 - (sum x)^2``."""
    X = np.asarray(X, float)
    n = X.shape[-1]
    centred = X - X.mean(axis=-1, keepdims=True)
    return np.sqrt(n * np.sum(centred * centred, axis=-1))


def norm_l(X, net: PowerNetwork) -> np.ndarray:
    X = np.asarray(X, float)
    u = X[..., net.tails] - X[..., net.heads]
    return np.sqrt(np.sum(u * u, axis=-1))


def norms(state, pair: IncidencePair):
    """``(||delta_c||, ||delta_l||, ||delta_c||_inf, ||delta_l||_inf)``."""
    x = state.delta if isinstance(state, energy.State) else np.asarray(state, float)
    dc = pair.B_c.T @ x
    dl = pair.B.T @ x
    return (
        float(np.linalg.norm(dc)),
        float(np.linalg.norm(dl)),
        float(np.max(np.abs(dc), initial=0.0)),
        float(np.max(np.abs(dl), initial=0.0)),
    )


rhs = energy.rhs


# -- disturbances -------------------------------------------------------------

@dataclass(frozen=True)
class PiecewiseConstant:
    """Values held from each start time until the next; zero before the first."""

    times: np.ndarray
    values: np.ndarray

    def at(self, t: float) -> np.ndarray:
        k = int(np.searchsorted(self.times, t + GRID_TOL, side="right")) - 1
        if k < 0:
            return np.zeros(self.values.shape[1:])
        return self.values[k]


@dataclass(frozen=True)
class DisturbanceSpec:
    nodes: tuple[int, ...]
    p_d: float
    hold_interval: float = 0.1
    seed: int = 0
    start_time: float = 5.0

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(sorted(int(k) for k in self.nodes)))
        if not self.hold_interval > 0:
            raise ValueError("hold_interval must be positive")
        if self.p_d < 0:
            raise ValueError("p_d must be non-negative")

    def draws(self, intervals: int, replica: int = 0) -> np.ndarray:
        """Uniform values in ``[-p_d, p_d]``, shape ``(intervals, len(nodes))``.

        Each node owns a generator keyed by ``(seed, node, replica)``, so the
        draw order is node-major and a node's sequence does not depend on the
        horizon.
        """
        out = np.empty((intervals, len(self.nodes)))
        for c, node in enumerate(self.nodes):
            key = np.array([self.seed, (node << 32) | replica], dtype=np.uint64)
            rng = np.random.Generator(np.random.Philox(key=key))
            out[:, c] = rng.uniform(-self.p_d, self.p_d, intervals)
        return out

    def schedule(self, n: int, t_end: float, replica: int = 0) -> PiecewiseConstant:
        intervals = max(0, math.ceil((t_end - self.start_time) / self.hold_interval - 1e-9))
        times = self.start_time + self.hold_interval * np.arange(intervals)
        vals = np.zeros((intervals, n))
        if intervals:
            vals[:, list(self.nodes)] = self.draws(intervals, replica)
        return PiecewiseConstant(times, vals)


@dataclass(frozen=True)
class TripSpec:
    """Line outage; ``reclose_rule`` is ``"on_C1_and_C2"``, ``"never"`` or ``"at_time"``."""

    edge: tuple[int, int]
    trip_time: float = 5.0
    reclose_rule: str = "on_C1_and_C2"
    reclose_time: float | None = None

    def __post_init__(self):
        if self.reclose_rule not in ("on_C1_and_C2", "never", "at_time"):
            raise ValueError(f"unknown reclose rule {self.reclose_rule!r}")
        if self.reclose_rule == "at_time" and self.reclose_time is None:
            raise ValueError("reclose_rule 'at_time' needs reclose_time")


# -- integration core ---------------------------------------------------------

@dataclass(frozen=True)
class _Model:
    """Edge arrays for the kernel plus a constant injection offset."""

    tails: np.ndarray
    heads: np.ndarray
    weights: np.ndarray
    theta_edge: np.ndarray
    dinv: np.ndarray
    offset: np.ndarray

    @classmethod
    def intact(cls, net: PowerNetwork, eq: Equilibrium) -> "_Model":
        th = eq.theta_o[net.tails] - eq.theta_o[net.heads]
        return cls(net.tails, net.heads, net.weights, th, 1.0 / net.d_array, np.zeros(net.n))

    @classmethod
    def tripped(cls, net: PowerNetwork, eq: Equilibrium, edge) -> "_Model":
        k = net.edge_index(*edge)
        keep = np.array([j for j in range(net.m) if j != k], dtype=np.int64)
        th = eq.theta_o[net.tails] - eq.theta_o[net.heads]
        # the lost line's scheduled flow becomes an unbalanced injection
        offset = np.zeros(net.n)
        flow = net.weights[k] * math.sin(th[k])
        offset[net.tails[k]] -= flow
        offset[net.heads[k]] += flow
        return cls(net.tails[keep], net.heads[keep], net.weights[keep], th[keep], 1.0 / net.d_array, offset)

    def field(self, X, P) -> np.ndarray:
        X = np.atleast_2d(X)
        u = X[:, self.tails] - X[:, self.heads]
        flow = self.weights * (np.sin(u + self.theta_edge) - np.sin(self.theta_edge))
        acc = np.array(P + self.offset, float, copy=True) * np.ones_like(X)
        np.add.at(acc.T, self.tails, -flow.T)
        np.add.at(acc.T, self.heads, flow.T)
        return acc * self.dinv

    def advance(self, X, P, h, nsteps, record=True):
        """In-place RK4; returns the recorded states ``(nsteps, batch, n)``."""
        P = np.ascontiguousarray(np.broadcast_to(P + self.offset, X.shape), dtype=float)
        out = np.empty((nsteps if record else 0,) + X.shape)
        rk4_advance(X, self.tails, self.heads, self.weights, self.theta_edge, self.dinv, P, h, nsteps, out)
        return out


def _grid_steps(t: float, h: float, what: str) -> int:
    k = round(t / h)
    if abs(k * h - t) > GRID_TOL * max(1.0, abs(t)):
        raise KurasyncError(f"{what} = {t} is not on the step grid h = {h}")
    return int(k)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    freq: np.ndarray
    events: list = field(default_factory=list)
    p: np.ndarray | None = None

    def add_event(self, t: float, label: str) -> None:
        self.events.append((float(t), label))
        self.events.sort(key=lambda e: e[0])

    def event_time(self, label: str):
        for t, lab in self.events:
            if lab == label:
                return t
        return None

    def norm_c(self) -> np.ndarray:
        return norm_c(self.states)

    def norm_l(self, net: PowerNetwork) -> np.ndarray:
        return norm_l(self.states, net)


def _run_phases(phases, x0, t0, h, schedule):
    """Integrates consecutive ``(model, t_end)`` phases of one trajectory."""
    x = np.array(x0, float).reshape(1, -1)
    n = x.shape[1]
    k0 = _grid_steps(t0, h, "start time")
    switch = [] if schedule is None else [_grid_steps(t, h, "disturbance switch time") for t in schedule.times]
    states, freqs, ps = [x[0].copy()], [], []
    k = k0
    for model, t_end in phases:
        k_end = _grid_steps(t_end, h, "phase end")
        while k < k_end:
            nxt = min([s for s in switch if s > k] + [k_end])
            P = np.zeros(n) if schedule is None else schedule.at(k * h)
            freqs.append(model.field(x, P)[0])
            ps.append(P)
            rec = model.advance(x, P, h, nxt - k)[:, 0, :]
            if not np.all(np.isfinite(rec)):
                bad = int(np.argmax(~np.all(np.isfinite(rec), axis=1)))
                t_last = (k + bad) * h
                raise SimulationDiverged(t_last)
            # derivatives at interior grid points of the segment
            if nxt - k > 1:
                freqs.extend(model.field(rec[:-1], P))
                ps.extend([P] * (nxt - k - 1))
            states.extend(rec)
            k = nxt
    P = np.zeros(n) if schedule is None else schedule.at(k * h)
    freqs.append(phases[-1][0].field(x, P)[0])
    ps.append(P)
    times = (k0 + np.arange(len(states))) * h
    return Trajectory(times, np.array(states), np.array(freqs), [], np.array(ps))


def integrate(net: PowerNetwork, eq: Equilibrium, x0, p_of_t: PiecewiseConstant | None, t_span, h: float = DEFAULT_STEP) -> Trajectory:
    """RK4 trajectory of the deviation dynamics on ``t_span`` with step ``h``."""
    if not h > 0:
        raise ValueError("step must be positive")
    t0, t1 = t_span
    return _run_phases([(_Model.intact(net, eq), t1)], x0, t0, h, p_of_t)


def integrate_batch(net, eq, X0, t_end, h=DEFAULT_STEP, p_values=None, hold_steps=None, chunk_steps=1000, monitor=None):
    """Integrates many initial states at once, optionally monitoring each chunk.

    ``p_values`` of shape ``(intervals, batch, n)`` is held for ``hold_steps``
    steps per interval (zero afterwards). ``monitor(times, states)`` receives
    every chunk with ``states`` of shape ``(steps, batch, n)``.
    """
    model = _Model.intact(net, eq)
    X = np.array(X0, float, copy=True)
    total = _grid_steps(t_end, h, "horizon")
    k = 0
    zero = np.zeros_like(X)
    while k < total:
        stop = min(total, k + chunk_steps)
        if p_values is not None:
            iv = k // hold_steps
            stop = min(stop, (iv + 1) * hold_steps)
            P = p_values[iv] if iv < len(p_values) else zero
        else:
            P = zero
        rec = model.advance(X, P, h, stop - k, record=monitor is not None)
        if monitor is not None:
            monitor((k + 1 + np.arange(stop - k)) * h, rec)
        k = stop
    return X


# -- scenarios ----------------------------------------------------------------

def _first_crossing(times, values, level):
    """Linear-interpolated first time ``values`` reaches ``level``."""
    idx = np.nonzero(values >= level)[0]
    if idx.size == 0:
        return None
    k = int(idx[0])
    if k == 0:
        return float(times[0])
    v0, v1 = values[k - 1], values[k]
    return float(times[k - 1] + (level - v0) / (v1 - v0) * (times[k] - times[k - 1]))


def _entry_time(times, values, level):
    """Earliest time after which ``values`` stays at or below ``level``."""
    above = np.nonzero(values > level)[0]
    if above.size == 0:
        return float(times[0])
    k = int(above[-1])
    if k == len(values) - 1:
        return None
    return float(times[k + 1])


@dataclass
class DisturbanceReport:
    settle_time: float | None
    realized_sup: dict
    max_norm_c: float
    max_norm_l: float
    stable: bool
    escape_time: float | None
    entry_time: float | None = None
    gamma_l: float | None = None
    gamma_r: float | None = None
    max_norm_after_injection: float | None = None
    freq_sup_after_entry: float | None = None
    varpi_bound: float | None = None
    ultimately_bounded: bool | None = None

    def as_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items()}


def run_disturbance_scenario(net, eq, spec: DisturbanceSpec, horizon=20.0, h=DEFAULT_STEP, x0=None, certificate: CertificateReport | None = None):
    """Settle with ``p = 0`` until ``spec.start_time``, then inject bounded random power."""
    x0 = np.zeros(net.n) if x0 is None else np.asarray(x0, float)
    sched = spec.schedule(net.n, horizon)
    model = _Model.intact(net, eq)
    try:
        traj = _run_phases([(model, horizon)], x0, 0.0, h, sched)
    except SimulationDiverged as exc:
        return None, DisturbanceReport(None, {}, math.inf, math.inf, False, exc.last_time)
    start = spec.start_time
    if start > 0:
        traj.add_event(start, "disturbance_on")
    pre = traj.times < start
    fi = np.max(np.abs(traj.freq), axis=1)
    settled = np.nonzero(pre & (fi < SETTLE_TOL))[0]
    settle_time = float(traj.times[settled[0]]) if settled.size else (start if start > 0 else None)
    if settle_time is not None:
        traj.add_event(settle_time, "settled")

    Wc, Wl = weighting_c(net), weighting_l(net)
    vals = sched.values
    realized = {
        "c": float(np.max(np.linalg.norm(vals @ Wc.T, axis=1), initial=0.0)),
        "l": float(np.max(np.linalg.norm(vals @ Wl.T, axis=1), initial=0.0)),
        "p_inf": float(np.max(np.abs(vals), initial=0.0)),
    }
    nc, nl = traj.norm_c(), traj.norm_l(net)
    edge_inf = np.max(np.abs(traj.states[:, net.tails] - traj.states[:, net.heads]), axis=1)
    escape = _first_crossing(traj.times, edge_inf, math.pi)
    if escape is not None:
        traj.add_event(escape, "escape")
    report = DisturbanceReport(settle_time, realized, float(nc.max()), float(nl.max()), escape is None, escape)
    if certificate is not None and certificate.window is not None:
        w = certificate.window
        norm = nc if certificate.details.get("norm") == "c" else nl
        after = traj.times >= start
        report.gamma_l, report.gamma_r = w.gamma_l, w.gamma_r
        report.max_norm_after_injection = float(norm[after].max())
        entry = _entry_time(traj.times[after], norm[after], w.gamma_l * (1 + 1e-9))
        report.entry_time = entry
        report.varpi_bound = certificate.varpi_bound
        if entry is not None:
            traj.add_event(entry, "entered_gamma_l")
            tail = traj.times >= entry
            report.freq_sup_after_entry = float(np.max(np.abs(traj.freq[tail])))
            report.ultimately_bounded = report.freq_sup_after_entry <= certificate.varpi_bound
        else:
            report.ultimately_bounded = False
    return traj, report


@dataclass
class TripReport:
    T1: float | None
    T2: float | None
    trip_time: float
    reclose_time: float | None
    gamma_r_I: float
    gamma_r_II: float
    converged: bool
    energy_monotone: bool
    final_norm_c: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def run_line_trip_scenario(net, eq, trip: TripSpec, roa_I_out: RoaResult, roa_II_out: RoaResult, horizon=20.0, h=DEFAULT_STEP, converge_tol=1e-6):
    """Trip a line, watch the intact-network ROA boundaries, and reclose.

    ``T1``/``T2`` are the first times ``||B_c^T delta||`` and ``||B^T delta||``
    (intact incidence matrices) reach the respective ``gamma_r``.
    """
    intact = _Model.intact(net, eq)
    tripped = _Model.tripped(net, eq, trip.edge)
    g1, g2 = roa_I_out.gamma_r, roa_II_out.gamma_r
    k_trip = _grid_steps(trip.trip_time, h, "trip time")
    k_end = _grid_steps(horizon, h, "horizon")

    x = np.zeros((1, net.n))
    states = [x[0].copy()]
    freqs = []
    pre = intact.advance(x, 0.0, h, k_trip)[:, 0, :]
    freqs.extend(intact.field(np.vstack([states[0], pre[:-1]]), 0.0) if k_trip else [])
    states.extend(pre)
    times_now = lambda: (len(states) - 1) * h

    T1 = T2 = None
    reclose_k = None
    if trip.reclose_rule == "at_time":
        reclose_k = max(k_trip, _grid_steps(trip.reclose_time, h, "reclose time"))
    k = k_trip
    prev_c = float(norm_c(x)[0])
    prev_l = float(norm_l(x, net)[0])
    while k < k_end and (reclose_k is None or k < reclose_k):
        if trip.reclose_rule == "on_C1_and_C2" and T1 is not None and T2 is not None:
            reclose_k = k
            break
        freqs.append(tripped.field(x, 0.0)[0])
        x_next = tripped.advance(x, 0.0, h, 1)[0, 0]
        if not np.all(np.isfinite(x_next)):
            raise SimulationDiverged(k * h)
        states.append(x_next.copy())
        k += 1
        c, l = float(norm_c(x_next)), float(norm_l(x_next, net))
        t_prev, t_now = (k - 1) * h, k * h
        if T1 is None and c >= g1:
            T1 = t_prev + (g1 - prev_c) / (c - prev_c) * h
        if T2 is None and l >= g2:
            T2 = t_prev + (g2 - prev_l) / (l - prev_l) * h
        prev_c, prev_l = c, l
    reclose_t = None
    if reclose_k is not None and reclose_k < k_end:
        reclose_t = round(reclose_k * h, 12)
        post = intact.advance(x, 0.0, h, k_end - reclose_k)[:, 0, :]
        freqs.extend(intact.field(np.vstack([states[-1], post[:-1]]), 0.0))
        states.extend(post)
    freqs.append((intact if reclose_t is not None else tripped).field(np.array(states[-1]), 0.0)[0])
    times = np.arange(len(states)) * h
    traj = Trajectory(times, np.array(states), np.array(freqs))
    traj.add_event(trip.trip_time, "trip")
    if T1 is not None:
        traj.add_event(T1, "C1")
    if T2 is not None:
        traj.add_event(T2, "C2")
    if reclose_t is not None:
        traj.add_event(reclose_t, "reclose")

    nc = traj.norm_c()
    converged = False
    monotone = False
    if reclose_t is not None:
        post_mask = traj.times >= reclose_t
        V = energy.v_quadratic(net, traj.states[post_mask])
        monotone = bool(np.all(np.diff(V) <= MONOTONE_RTOL * V[:-1] + MONOTONE_ATOL))
        converged = bool(nc[-1] < converge_tol)
    report = TripReport(
        None if T1 is None else float(T1), None if T2 is None else float(T2), trip.trip_time,
        None if reclose_t is None else round(reclose_t, 12), float(g1), float(g2), converged, monotone, float(nc[-1]),
    )
    return traj, report


# -- export -------------------------------------------------------------------

def trajectory_columns(traj: Trajectory, net: PowerNetwork, eq: Equilibrium) -> dict:
    cols = {"t": traj.times}
    for i in range(net.n):
        cols[f"delta_{i + 1}"] = traj.states[:, i]
    for i in range(net.n):
        cols[f"ddelta_{i + 1}"] = traj.freq[:, i]
    cols["V_quadratic"] = energy.v_quadratic(net, traj.states)
    cols["V_potential"] = energy.v_potential(net, eq, traj.states)
    cols["norm_c"] = traj.norm_c()
    cols["norm_l"] = traj.norm_l(net)
    return cols


def write_trajectory_csv(path, traj: Trajectory, net: PowerNetwork, eq: Equilibrium, every: int = 1) -> None:
    cols = trajectory_columns(traj, net, eq)
    names = list(cols)
    data = np.column_stack([cols[k] for k in names])[::every]
    with open(path, "w", newline="") as fh:
        fh.write(f"# {CSV_VERSION}\n")
        w = csv.writer(fh)
        w.writerow(names)
        for row in data:
            w.writerow([repr(float(v)) for v in row])


def write_long_csv(path, traj: Trajectory, net: PowerNetwork, eq: Equilibrium, every: int = 10) -> None:
    """Plot-ready ``t, series, value`` rows."""
    cols = trajectory_columns(traj, net, eq)
    t = cols.pop("t")[::every]
    with open(path, "w", newline="") as fh:
        fh.write(f"# {CSV_VERSION} long\n")
        w = csv.writer(fh)
        w.writerow(["t", "series", "value"])
        for name, vals in cols.items():
            for ti, v in zip(t, vals[::every]):
                w.writerow([repr(float(ti)), name, repr(float(v))])


def write_events(path, traj: Trajectory) -> None:
    with open(path, "w") as fh:
        json.dump([{"t": t, "event": lab} for t, lab in traj.events], fh, indent=2)
