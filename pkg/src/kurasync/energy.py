"""Energy functions in deviation coordinates and their quadratic bounds."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .equilibrium import Equilibrium
from .network import IncidencePair, PowerNetwork, build_incidence
from .rplf import kappa


@dataclass(frozen=True)
class State:
    delta: np.ndarray
    pair: IncidencePair

    @classmethod
    def of(cls, delta, net_or_pair) -> "State":
        pair = net_or_pair if isinstance(net_or_pair, IncidencePair) else build_incidence(net_or_pair)
        return cls(np.asarray(delta, float), pair)

    @property
    def delta_l(self) -> np.ndarray:
        return self.pair.B.T @ self.delta

    @property
    def delta_c(self) -> np.ndarray:
        return self.pair.B_c.T @ self.delta


def _delta(state) -> np.ndarray:
    return state.delta if isinstance(state, State) else np.asarray(state, float)


def _theta_edge(net: PowerNetwork, eq: Equilibrium) -> np.ndarray:
    return eq.theta_o[net.tails] - eq.theta_o[net.heads]


def v_quadratic(net: PowerNetwork, state) -> np.ndarray | float:
    """``1/2 delta^T (D - D e e^T D / d) delta``; rows of a 2-D input are states."""
    x = _delta(state)
    dv = net.d_array
    dx = x @ dv
    val = 0.5 * (np.sum(dv * x * x, axis=-1) - dx * dx / dv.sum())
    return np.maximum(val, 0.0) if np.ndim(val) else max(float(val), 0.0)


def v_potential(net: PowerNetwork, eq: Equilibrium, state) -> np.ndarray | float:
    """Coupling potential energy stored in the lines, relative to the operating point."""
    x = _delta(state)
    th = _theta_edge(net, eq)
    u = x[..., net.tails] - x[..., net.heads]
    terms = net.weights * (np.cos(th) - np.cos(u + th) - u * np.sin(th))
    val = np.sum(terms, axis=-1)
    return val if np.ndim(val) else float(val)


def gradient_quadratic(net: PowerNetwork, state) -> np.ndarray:
    x = _delta(state)
    dv = net.d_array
    return dv * x - dv * (x @ dv)[..., None] / dv.sum() if x.ndim > 1 else dv * x - dv * (x @ dv) / dv.sum()


def coupling_flow(net: PowerNetwork, eq: Equilibrium, state) -> np.ndarray:
    """Per-line ``a_ij (sin(u + theta_ij) - sin(theta_ij))``."""
    x = _delta(state)
    th = _theta_edge(net, eq)
    u = x[..., net.tails] - x[..., net.heads]
    return net.weights * (np.sin(u + th) - np.sin(th))


def gradient_potential(net: PowerNetwork, eq: Equilibrium, state) -> np.ndarray:
    flow = coupling_flow(net, eq, state)
    B = build_incidence(net).B
    return flow @ B.T


def rhs(net: PowerNetwork, eq: Equilibrium, state, p_now=None) -> np.ndarray:
    """Deviation dynamics ``-D^{-1}(B A_v (sin(B^T(delta + theta_o)) - sin(B^T theta_o)) - p)``."""
    x = _delta(state)
    out = -gradient_potential(net, eq, x)
    if p_now is not None:
        out = out + np.asarray(p_now, float)
    return out / net.d_array


def vdot_along(net: PowerNetwork, eq: Equilibrium, state, p_now=None, which: str = "quadratic") -> float:
    """Time derivative of the chosen energy along the deviation dynamics."""
    x = _delta(state)
    xdot = rhs(net, eq, x, p_now)
    if which == "quadratic":
        grad = gradient_quadratic(net, x)
    elif which == "potential":
        grad = gradient_potential(net, eq, x)
    else:
        raise ValueError(f"unknown energy {which!r}")
    return float(grad @ xdot)


def a_p_matrix(net: PowerNetwork, eq: Equilibrium, state) -> np.ndarray:
    """Diagonal of sine difference quotients, filled with ``cos(theta_ij)`` where ``u = 0``."""
    x = _delta(state)
    th = _theta_edge(net, eq)
    u = x[net.tails] - x[net.heads]
    safe = np.where(u == 0.0, 1.0, u)
    q = np.where(u == 0.0, np.cos(th), (np.sin(u + th) - np.sin(th)) / safe)
    return np.diag(q)


@dataclass(frozen=True)
class BoundCheck:
    applicable: bool
    lower: float
    value: float
    upper: float
    holds: bool
    notice: str = ""


def check_bounds(net: PowerNetwork, eq: Equilibrium, state, gamma: float) -> BoundCheck:
    """``kappa(gamma) min(a)/2 ||delta_l||^2 <= V_potential <= max(a)/2 ||delta_l||^2``."""
    x = _delta(state)
    u = x[net.tails] - x[net.heads]
    end = np.pi - 2 * eq.delta_l_bar
    if not gamma < end:
        return BoundCheck(False, np.nan, np.nan, np.nan, True, f"gamma={gamma} not below pi - 2*delta_l_bar")
    if np.max(np.abs(u), initial=0.0) > gamma:
        return BoundCheck(False, np.nan, np.nan, np.nan, True, "state outside the region: max line deviation exceeds gamma")
    nl2 = float(u @ u)
    a = net.weights
    lower = kappa(gamma, eq.delta_l_bar) * a.min() / 2 * nl2
    upper = a.max() / 2 * nl2
    v = v_potential(net, eq, x)
    slack = 1e-12 * max(1.0, upper)
    return BoundCheck(True, lower, v, upper, lower - slack <= v <= upper + slack)
