"""Synchronization certificates and region-of-attraction estimates.

Three disturbance criteria are provided:

* ``"I"``: all-pair cohesiveness in deviation coordinates, compared against
  the algebraic connectivity ``lambda_2``;
* ``"I-original"``: the same test in the original angle coordinates
  (zero operating point);
* ``"II"``: line-wise cohesiveness, compared against the smallest non-zero
  eigenvalue of ``Q = A_v B^T D^{-1} B A_v``.

plus two disturbance-free region-of-attraction estimates ``roa_I`` and
``roa_II``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import rplf
from .equilibrium import Equilibrium
from .errors import AssumptionViolation, DomainError
from .network import (
    PowerNetwork,
    algebraic_connectivity,
    build_incidence,
    laplacian,
    q_matrix,
    smallest_nonzero_eigenvalue,
)
from .rplf import RegionBounds, Window, kappa

MAX_SUPPORT = 12
KYP_TOL = 1e-10


@dataclass(frozen=True)
class DisturbanceBound:
    """Per-node magnitude bound ``|p_k(t)| <= p_d`` on ``support``.

    ``realized_sup`` optionally carries measured sup-norms of the weighted
    disturbance vectors, keyed ``"c"`` (all-pair weighting) and ``"l"``
    (line weighting); when present they replace the worst-case values.
    """

    p_d: float
    support: frozenset[int] = frozenset()
    realized_sup: dict | None = None

    def __post_init__(self):
        object.__setattr__(self, "support", frozenset(int(k) for k in self.support))
        if self.p_d < 0:
            raise ValueError(f"p_d must be non-negative, got {self.p_d}")
        if self.p_d > 0 and not self.support:
            raise ValueError("a positive disturbance bound needs a non-empty support")

    @classmethod
    def zero(cls) -> "DisturbanceBound":
        return cls(0.0)


@dataclass(frozen=True)
class CertificateReport:
    criterion: str
    lambda_value: float
    lambda_cr: float
    window: Window | None
    passed: bool
    varpi_bound: float | None = None
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "criterion": self.criterion,
            "passed": bool(self.passed),
            "lambda_value": float(self.lambda_value),
            "lambda_cr": float(self.lambda_cr),
            "window": self.window.as_dict() if self.window else None,
            "varpi_bound": None if self.varpi_bound is None else float(self.varpi_bound),
            "details": {k: _plain(v) for k, v in self.details.items()},
        }


@dataclass(frozen=True)
class RoaResult:
    criterion: str
    f_r_max: float
    gamma_r: float
    gamma_m: float
    details: dict = field(default_factory=dict)

    def __iter__(self):
        return iter((self.f_r_max, self.gamma_r))

    def as_dict(self) -> dict:
        out = {"criterion": self.criterion, "f_r_max": self.f_r_max, "gamma_r": self.gamma_r, "gamma_m": self.gamma_m}
        out["details"] = {k: _plain(v) for k, v in self.details.items()}
        return out


def _plain(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    return v


# -- disturbance norms --------------------------------------------------------

def worst_case_norm(M: np.ndarray, support, p_d: float) -> float:
    """``max ||M p||_2`` over ``|p_k| <= p_d`` on ``support`` (zero elsewhere).

    The maximum of a convex function over a box sits at a vertex, so the
    sign patterns are enumerated (one global sign fixed by symmetry).
    """
    support = sorted(support)
    if p_d == 0 or not support:
        return 0.0
    if len(support) > MAX_SUPPORT:
        raise ValueError(f"support of {len(support)} nodes exceeds the enumeration limit {MAX_SUPPORT}")
    cols = M[:, support]
    best = 0.0
    for signs in itertools.product((1.0, -1.0), repeat=len(support) - 1):
        s = np.array((1.0,) + signs)
        best = max(best, float(np.linalg.norm(cols @ s)))
    return best * p_d


def pair_products(d) -> np.ndarray:
    d = np.asarray(d, float)
    return np.array([d[i] * d[j] for i, j in itertools.combinations(range(len(d)), 2)])


def weighting_c(net: PowerNetwork) -> np.ndarray:
    """``diag{d_i d_j} B_c^T D^{-1}``."""
    B_c = build_incidence(net).B_c
    return (pair_products(net.d)[:, None] * B_c.T) / net.d_array[None, :]


def weighting_l(net: PowerNetwork) -> np.ndarray:
    """``A_v B^T D^{-1}``."""
    B = build_incidence(net).B
    return (net.weights[:, None] * B.T) / net.d_array[None, :]


def _disturbance_norm(net, bound: DisturbanceBound, key: str) -> float:
    if bound.realized_sup is not None and key in bound.realized_sup:
        return float(bound.realized_sup[key])
    M = weighting_c(net) if key == "c" else weighting_l(net)
    return worst_case_norm(M, bound.support, bound.p_d)


def frequency_bound(net: PowerNetwork, p_d: float) -> float:
    """Coarse bound ``max_i (2 sum_j a_ij + p_d) / d_i`` on ``||d delta/dt||_inf``."""
    strength = np.zeros(net.n)
    np.add.at(strength, net.tails, net.weights)
    np.add.at(strength, net.heads, net.weights)
    return float(np.max((2.0 * strength + p_d) / net.d_array))


# -- criterion I / I-original -------------------------------------------------

def _criterion_c(net, bound, delta_l_bar, delta_m_bar, name):
    n = net.n
    lam2 = algebraic_connectivity(laplacian(net))
    prod = pair_products(net.d)
    pmin, pmax = float(prod.min()), float(prod.max())
    dsum = float(net.d_array.sum())
    w = n * _disturbance_norm(net, bound, "c")
    ratio = math.sqrt(pmax / pmin)

    def sigma(g):
        return ratio * w / (g * kappa(g, delta_l_bar) * dsum)

    gamma_star = math.pi / 2 - delta_l_bar
    gamma_m = math.pi - delta_m_bar
    lam_cr = sigma(gamma_star)

    def mu(g):
        if w == 0.0:
            return 0.0
        k = kappa(g, delta_l_bar)
        return math.inf if k == 0.0 else w / (k * lam2 * dsum)

    bounds = RegionBounds(
        alpha_lower=lambda g: pmin / (2 * dsum),
        alpha_upper=lambda g: pmax / (2 * dsum),
        mu=mu,
        gamma_m=gamma_m,
    )
    passed = lam2 > lam_cr
    window = rplf.certify(bounds, gamma_star) if passed else None
    details = {
        "delta_l_bar": delta_l_bar,
        "delta_m_bar": delta_m_bar,
        "gamma_star": gamma_star,
        "gamma_m": gamma_m,
        "disturbance_norm": w / n,
        "R_s": ratio * w / (lam2 * dsum),
        "alpha_lower": pmin / (2 * dsum),
        "alpha_upper": pmax / (2 * dsum),
        "norm": "c",
    }
    if window is not None:
        details["f_l_min_closed_form"] = window.gamma_min ** 2 * pmin / (2 * dsum)
        details["f_r_max_closed_form"] = window.gamma_max ** 2 * pmin / (2 * dsum)
        details["gamma_r_closed_form"] = window.gamma_max * math.sqrt(pmin / pmax)
    return CertificateReport(
        name, lam2, lam_cr, window, passed, frequency_bound(net, bound.p_d), details
    ), bounds


def _check_assumption1(eq: Equilibrium):
    if not eq.delta_l_bar < math.pi / 2:
        raise AssumptionViolation(
            "line-angle security (max line angle < pi/2)", f"delta_l_bar = {eq.delta_l_bar:.6f}"
        )


def criterion_I(net: PowerNetwork, eq: Equilibrium, bound: DisturbanceBound, *, return_bounds=False):
    _check_assumption1(eq)
    if not eq.delta_c_bar - eq.delta_l_bar < math.pi / 2:
        raise AssumptionViolation(
            "delta_c_bar - delta_l_bar < pi/2",
            f"delta_c_bar - delta_l_bar = {eq.delta_c_bar - eq.delta_l_bar:.6f}",
        )
    report, bounds = _criterion_c(net, bound, eq.delta_l_bar, eq.delta_m_bar, "I")
    return (report, bounds) if return_bounds else report


def criterion_I_original(net: PowerNetwork, bound: DisturbanceBound, *, return_bounds=False):
    """Criterion I on the angle dynamics about the zero operating point."""
    report, bounds = _criterion_c(net, bound, 0.0, 0.0, "I-original")
    return (report, bounds) if return_bounds else report


# -- criterion II -------------------------------------------------------------

GAMMA_STAR_EXPONENTS_II = (2.5, 1.0)


def criterion_II(net: PowerNetwork, eq: Equilibrium, bound: DisturbanceBound, *, return_bounds=False):
    _check_assumption1(eq)
    dl = eq.delta_l_bar
    a = net.weights
    amin, amax = float(a.min()), float(a.max())
    lam_s = smallest_nonzero_eigenvalue(q_matrix(net))
    w = _disturbance_norm(net, bound, "l")
    ratio = amax / amin

    def sigma(g):
        return w / (g * kappa(g, dl) ** 2.5) * ratio ** 1.5

    gamma_star = rplf.solve_gamma_star(*GAMMA_STAR_EXPONENTS_II, dl)
    gamma_m = math.pi - 2 * dl
    lam_cr = sigma(gamma_star)

    def mu(g):
        if w == 0.0:
            return 0.0
        k = kappa(g, dl)
        return math.inf if k == 0.0 else w * amax / (lam_s * k * k * amin)

    bounds = RegionBounds(
        alpha_lower=lambda g: kappa(g, dl) * amin / 2,
        alpha_upper=lambda g: amax / 2,
        mu=mu,
        gamma_m=gamma_m,
    )
    passed = lam_s > lam_cr
    window = rplf.certify(bounds, gamma_star) if passed else None
    gamma_s = rplf.solve_gamma_star(1.0, 2.0, dl)
    details = {
        "delta_l_bar": dl,
        "gamma_star": gamma_star,
        "gamma_m": gamma_m,
        "gamma_s": gamma_s,
        "disturbance_norm": w,
        "R_s": ratio ** 1.5 * w / lam_s,
        "a_ratio": ratio,
        "norm": "l",
    }
    if window is not None:
        details["f_l_min_closed_form"] = window.gamma_min ** 2 * kappa(window.gamma_min, dl) * amin / 2
        details["f_r_max_closed_form"] = gamma_s ** 2 * kappa(gamma_s, dl) * amin / 2
        details["gamma_r_closed_form"] = gamma_s * math.sqrt(kappa(gamma_s, dl) * amin / amax)
        details["gamma_s_in_window"] = window.gamma_min <= gamma_s <= window.gamma_max
    report = CertificateReport("II", lam_s, lam_cr, window, passed, frequency_bound(net, bound.p_d), details)
    return (report, bounds) if return_bounds else report


# -- regions of attraction ----------------------------------------------------

def roa_bounds_I(net: PowerNetwork, eq: Equilibrium) -> RegionBounds:
    prod = pair_products(net.d)
    dsum = float(net.d_array.sum())
    pmin, pmax = float(prod.min()), float(prod.max())
    return RegionBounds(lambda g: pmin / (2 * dsum), lambda g: pmax / (2 * dsum), lambda g: 0.0, math.pi - eq.delta_m_bar)


def roa_bounds_II(net: PowerNetwork, eq: Equilibrium) -> RegionBounds:
    a = net.weights
    amin, amax, dl = float(a.min()), float(a.max()), eq.delta_l_bar
    return RegionBounds(lambda g: kappa(g, dl) * amin / 2, lambda g: amax / 2, lambda g: 0.0, math.pi - 2 * dl)


def roa_I(net: PowerNetwork, eq: Equilibrium) -> RoaResult:
    """Ball ``||B_c^T delta|| <= gamma_r`` attracted to the synchronous subspace."""
    prod = pair_products(net.d)
    dsum = float(net.d_array.sum())
    pmin, pmax = float(prod.min()), float(prod.max())
    gm = math.pi - eq.delta_m_bar
    f_r_max = gm * gm * pmin / (2 * dsum)
    gamma_r = gm * math.sqrt(pmin / pmax)
    f_eng, g_eng = rplf.roa_window(roa_bounds_I(net, eq))
    return RoaResult("roa_I", f_r_max, gamma_r, gm, {"f_r_max_engine": f_eng, "gamma_r_engine": g_eng, "norm": "c"})


def roa_II(net: PowerNetwork, eq: Equilibrium) -> RoaResult:
    """Ball ``||B^T delta|| <= gamma_r`` attracted to the synchronous subspace."""
    _check_assumption1(eq)
    a = net.weights
    amin, amax, dl = float(a.min()), float(a.max()), eq.delta_l_bar
    gamma_s = rplf.solve_gamma_star(1.0, 2.0, dl)
    k = kappa(gamma_s, dl)
    f_r_max = gamma_s ** 2 * k * amin / 2
    gamma_r = gamma_s * math.sqrt(k * amin / amax)
    f_eng, g_eng = rplf.roa_window(roa_bounds_II(net, eq))
    return RoaResult(
        "roa_II", f_r_max, gamma_r, math.pi - 2 * dl,
        {"gamma_s": gamma_s, "f_r_max_engine": f_eng, "gamma_r_engine": g_eng, "norm": "l"},
    )


# -- KYP equalities -----------------------------------------------------------

@dataclass(frozen=True)
class KypReport:
    residuals: dict
    passed: bool
    failed: tuple[str, ...]


def kyp_matrix(net: PowerNetwork) -> np.ndarray:
    """``D - D e e^T D / d`` with ``d = sum(d_i)``."""
    dv = net.d_array
    return np.diag(dv) - np.outer(dv, dv) / dv.sum()


def verify_kyp(net: PowerNetwork, alpha: float, beta: float, P: np.ndarray | None = None, tol: float = KYP_TOL) -> KypReport:
    """Residuals of the KYP-type equalities for ``F = 0, G = D^{-1}, H = I``.

    The storage matrix is ``alpha * (D - D e e^T D / d)`` unless ``P`` is
    given, with ``L = 0``, ``X = -alpha D e / d`` and
    ``W = sqrt(2 beta) D^{-1/2}``.
    """
    if beta < 0:
        raise DomainError("beta must be non-negative for a real W")
    n = net.n
    dv = net.d_array
    F = np.zeros((n, n))
    G = np.diag(1.0 / dv)
    H = np.eye(n)
    L = np.zeros((n, n))
    e = np.ones(n)
    if P is None:
        P = alpha * kyp_matrix(net)
    X = -alpha * dv / dv.sum()
    W = math.sqrt(2 * beta) * np.diag(dv ** -0.5)
    r1 = P @ F + F.T @ P + L @ L.T
    r2 = P @ G - (alpha * H + beta * F.T @ H - L @ W + np.outer(X, e))
    r3 = W.T @ W - beta * (H.T @ G + G.T @ H)
    residuals = {
        "PF+F'P=-LL'": float(np.max(np.abs(r1))),
        "PG=aH+bF'H-LW+Xe'": float(np.max(np.abs(r2))),
        "W'W=b(H'G+G'H)": float(np.max(np.abs(r3))),
        "P symmetric": float(np.max(np.abs(P - P.T))),
    }
    failed = tuple(k for k, v in residuals.items() if v > tol)
    return KypReport(residuals, not failed, failed)
