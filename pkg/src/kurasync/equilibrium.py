"""Lossless power-flow solution and equilibrium angle spreads."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import NearCriticalLoadingError, NoConvergenceError, PowerFlowError
from .network import IncidencePair, PowerNetwork, build_incidence, incidence_matrix

log = logging.getLogger(__name__)

BALANCE_TOL = 1e-9
RESIDUAL_TOL = 1e-10
MAX_ITER = 50
MAX_HALVINGS = 6
MAX_COND = 1e12


@dataclass(frozen=True)
class Equilibrium:
    theta_o: np.ndarray
    p_o: np.ndarray
    delta_l_bar: float
    delta_c_bar: float
    delta_m_bar: float
    residual: float = 0.0
    secure: bool = True
    iterations: int = 0
    residual_history: tuple[float, ...] = field(default=(), repr=False)

    @property
    def assumption1(self) -> bool:
        """Every line angle below pi/2 at the operating point."""
        return self.delta_l_bar < np.pi / 2


def flow_residual(net: PowerNetwork, theta, p_o) -> np.ndarray:
    B = incidence_matrix(net)
    return B @ (net.weights * np.sin(B.T @ np.asarray(theta, float))) - np.asarray(p_o, float)


def spreads(theta_o, net: PowerNetwork, pair: IncidencePair | None = None):
    """(delta_l_bar, delta_c_bar, delta_m_bar) of an angle profile."""
    theta_o = np.asarray(theta_o, float)
    B = pair.B if pair is not None else incidence_matrix(net)
    dl = float(np.max(np.abs(B.T @ theta_o))) if B.shape[1] else 0.0
    # all-pairs maximum of |theta_i - theta_j|
    dc = float(theta_o.max() - theta_o.min())
    return dl, dc, max(2.0 * dl, dc)


def make_equilibrium(net: PowerNetwork, theta_o, p_o, **info) -> Equilibrium:
    """Wrap a given angle profile (e.g. tabulated values) without solving."""
    theta_o = np.asarray(theta_o, float)
    dl, dc, dm = spreads(theta_o, net)
    res = info.pop("residual", float(np.max(np.abs(flow_residual(net, theta_o, p_o)))))
    return Equilibrium(
        theta_o=theta_o, p_o=np.asarray(p_o, float), delta_l_bar=dl, delta_c_bar=dc, delta_m_bar=dm,
        residual=res, secure=dl < np.pi / 2, **info,
    )


def solve_power_flow(
    net: PowerNetwork,
    p_o,
    reference_node: int = 0,
    reference_angle: float = 0.0,
    theta0=None,
) -> Equilibrium:
    """Newton iteration on the non-reference angles with step halving.

    A step is halved (up to six times) until the residual's infinity norm
    decreases. Solutions with a line angle at or beyond pi/2 are returned with
    ``secure=False``.
    """
    p_o = np.asarray(p_o, float)
    if p_o.shape != (net.n,):
        raise PowerFlowError(f"power profile must have {net.n} entries")
    if abs(p_o.sum()) > BALANCE_TOL:
        raise PowerFlowError(f"unbalanced power profile: sum(p_o) = {p_o.sum():.3e}")
    pair = build_incidence(net)
    B, a = pair.B, net.weights
    free = np.array([k for k in range(net.n) if k != reference_node])

    theta = np.zeros(net.n) if theta0 is None else np.array(theta0, float)
    theta += reference_angle - theta[reference_node]

    def resid(th):
        return B @ (a * np.sin(B.T @ th)) - p_o

    scale = float(np.sum(a))

    def reduced_jacobian(th):
        J = (B * (a * np.cos(B.T @ th))) @ B.T
        Jr = J[np.ix_(free, free)]
        sv = np.linalg.svd(Jr, compute_uv=False)
        return Jr, sv[-1] <= max(sv[0] / MAX_COND, scale / MAX_COND)

    F = resid(theta)
    norm = float(np.max(np.abs(F)))
    history = [norm]
    it = 0
    while norm > RESIDUAL_TOL:
        if it >= MAX_ITER:
            raise NoConvergenceError(f"power flow did not converge in {MAX_ITER} iterations", norm)
        Jr, singular = reduced_jacobian(theta)
        try:
            if singular:
                raise np.linalg.LinAlgError
            step = np.linalg.solve(Jr, -F[free])
        except np.linalg.LinAlgError:
            raise NearCriticalLoadingError(
                f"singular power-flow Jacobian at iteration {it} (near-critical loading)"
            ) from None
        scale = 1.0
        for _ in range(MAX_HALVINGS + 1):
            trial = theta.copy()
            trial[free] += scale * step
            F_trial = resid(trial)
            n_trial = float(np.max(np.abs(F_trial)))
            if n_trial < norm:
                break
            scale *= 0.5
        else:
            raise NoConvergenceError("step halving failed to reduce the residual", norm)
        theta, F, norm = trial, F_trial, n_trial
        history.append(norm)
        it += 1

    # a solution sitting on the loadability limit is not an isolated operating point
    if reduced_jacobian(theta)[1]:
        raise NearCriticalLoadingError("power-flow Jacobian is singular at the solution (critical loading)")

    dl, dc, dm = spreads(theta, net, pair)
    secure = dl < np.pi / 2
    if not secure:
        log.warning("power-flow solution is not secure: max line angle %.4f >= pi/2", dl)
    return Equilibrium(theta, p_o, dl, dc, dm, norm, secure, it, tuple(history))


@dataclass(frozen=True)
class ResidualReport:
    residual: np.ndarray
    max_abs: float


def verify_equilibrium(net: PowerNetwork, eq: Equilibrium) -> ResidualReport:
    r = flow_residual(net, eq.theta_o, eq.p_o)
    return ResidualReport(r, float(np.max(np.abs(r))))


def equilibrium_report(eq: Equilibrium, bus_offset: int = 1) -> dict:
    return {
        "theta_o": {str(k + bus_offset): float(x) for k, x in enumerate(eq.theta_o)},
        "p_o": [float(x) for x in eq.p_o],
        "delta_l_bar": eq.delta_l_bar,
        "delta_c_bar": eq.delta_c_bar,
        "delta_m_bar": eq.delta_m_bar,
        "residual_inf": eq.residual,
        "secure": bool(eq.secure),
        "assumption1": bool(eq.assumption1),
        "iterations": eq.iterations,
    }
