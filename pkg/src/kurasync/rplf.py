"""Region-parametrized Lyapunov machinery.

A region-parametrized Lyapunov function on ``||x|| <= gamma`` is summarized
by :class:`RegionBounds`: quadratic bounds ``alpha_lower(gamma)``,
``alpha_upper(gamma)`` and the radius ``mu(gamma)`` outside of which the
function strictly decreases. From these the module derives the window
``[gamma_min, gamma_max]`` on which ``g(gamma) >= 1``, the energy levels that
define positively invariant sublevel sets, and the corresponding balls.

All roots are found by bisection (absolute tolerance 1e-10) inside brackets
located by a 10^3-point scan; extrema by a grid scan refined with a
golden-section search.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, WindowError

ROOT_TOL = 1e-10
SCAN_POINTS = 1000
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


# -- scalar kernels -----------------------------------------------------------

def _domain_end(delta_l_bar: float) -> float:
    return math.pi - 2.0 * delta_l_bar


def kappa(gamma, delta_l_bar: float = 0.0):
    """``sinc(gamma/2) * cos(gamma/2 + delta_l_bar)`` with ``sinc(0) = 1``.

    Accepts scalars or arrays; the admissible range is
    ``0 <= gamma <= pi - 2*delta_l_bar``.
    """
    g = np.asarray(gamma, dtype=float)
    end = _domain_end(delta_l_bar)
    if np.any(g < 0) or np.any(g > end + 1e-12):
        raise DomainError(f"kappa requires 0 <= gamma <= {end:.12g}, got {gamma}")
    half = 0.5 * g
    with np.errstate(invalid="ignore", divide="ignore"):
        sinc = np.where(half == 0.0, 1.0, np.sin(half) / np.where(half == 0.0, 1.0, half))
    out = sinc * np.cos(half + delta_l_bar)
    out = np.maximum(out, 0.0)
    return float(out) if out.ndim == 0 else out


def f_pq(gamma, p: float, q: float, delta_l_bar: float = 0.0):
    """``gamma**q * kappa(gamma)**p``."""
    if p < 0 or q < 0:
        raise DomainError(f"exponents must be non-negative, got p={p}, q={q}")
    g = np.asarray(gamma, dtype=float)
    out = g ** q * np.asarray(kappa(g, delta_l_bar)) ** p
    return float(out) if out.ndim == 0 else out


def _stationarity(gamma: float, p: float, q: float, delta_l_bar: float) -> float:
    return p * math.cos(gamma + delta_l_bar) - (p - q) * kappa(gamma, delta_l_bar)


# -- root finding and extrema ------------------------------------------------

def bisect(fn: Callable[[float], float], lo: float, hi: float, tol: float = ROOT_TOL) -> float:
    flo, fhi = fn(lo), fn(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise DomainError(f"no sign change on [{lo}, {hi}]")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def scan_bracket(fn, lo: float, hi: float, points: int = SCAN_POINTS, from_right: bool = False):
    """First sub-interval of a uniform scan on which ``fn`` changes sign."""
    xs = np.linspace(lo, hi, points + 1)
    vals = [fn(x) for x in xs]
    idx = range(points - 1, -1, -1) if from_right else range(points)
    for k in idx:
        a, b = vals[k], vals[k + 1]
        if a == 0.0:
            return xs[k], xs[k]
        if b == 0.0:
            return xs[k + 1], xs[k + 1]
        if (a > 0) != (b > 0):
            return xs[k], xs[k + 1]
    return None


def find_root(fn, lo: float, hi: float, *, from_right: bool = False) -> float:
    br = scan_bracket(fn, lo, hi, from_right=from_right)
    if br is None:
        raise DomainError(f"no sign change found on [{lo}, {hi}]")
    a, b = br
    return a if a == b else bisect(fn, a, b)


def golden_max(fn, lo: float, hi: float, tol: float = 1e-12) -> tuple[float, float]:
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = fn(d)
    x = 0.5 * (a + b)
    return x, fn(x)


def grid_golden_max(fn, lo: float, hi: float, points: int = SCAN_POINTS) -> tuple[float, float]:
    """Maximum over ``[lo, hi]``: uniform scan, then golden-section around the best node."""
    if hi <= lo:
        return lo, fn(lo)
    xs = np.linspace(lo, hi, points + 1)
    vals = np.array([fn(x) for x in xs])
    k = int(np.argmax(vals))
    a, b = xs[max(k - 1, 0)], xs[min(k + 1, points)]
    x, fx = golden_max(fn, a, b)
    if fx >= vals[k]:
        return x, fx
    return float(xs[k]), float(vals[k])


def solve_gamma_star(p: float, q: float, delta_l_bar: float = 0.0) -> float:
    """Interior maximizer of ``gamma**q * kappa**p`` on ``(0, pi - 2*delta_l_bar)``.

    It is the root of ``p cos(gamma + delta_l_bar) = (p - q) kappa(gamma)``;
    the residual is ``q cos(delta_l_bar) > 0`` at zero and negative at the far end.
    """
    if p <= 0 or q <= 0:
        raise DomainError(f"solve_gamma_star needs p, q > 0, got p={p}, q={q}")
    if not 0 <= delta_l_bar < math.pi / 2:
        raise DomainError(f"delta_l_bar must lie in [0, pi/2), got {delta_l_bar}")
    end = _domain_end(delta_l_bar)
    if p == q:
        return math.pi / 2 - delta_l_bar
    return find_root(lambda g: _stationarity(g, p, q, delta_l_bar), 0.0, end)


# -- the framework -----------------------------------------------------------

@dataclass(frozen=True)
class RegionBounds:
    alpha_lower: Callable[[float], float]
    alpha_upper: Callable[[float], float]
    mu: Callable[[float], float]
    gamma_m: float

    def g(self, gamma: float) -> float:
        """``gamma / mu(gamma) * sqrt(alpha_lower / alpha_upper)``."""
        if gamma <= 0.0:
            return 0.0
        mu = self.mu(gamma)
        if mu == 0.0:
            return math.inf
        ratio = self.alpha_lower(gamma) / self.alpha_upper(gamma)
        return gamma / mu * math.sqrt(max(ratio, 0.0))

    def f_l(self, gamma: float) -> float:
        return self.alpha_upper(gamma) * self.mu(gamma) ** 2

    def f_r(self, gamma: float) -> float:
        return gamma * gamma * self.alpha_lower(gamma)


@dataclass(frozen=True)
class Window:
    gamma_star: float
    gamma_min: float
    gamma_max: float
    f_l_min: float
    f_r_max: float
    gamma_l: float
    gamma_r: float

    def as_dict(self) -> dict:
        return {k: float(v) for k, v in self.__dict__.items()}


def solve_crossings(g: Callable[[float], float], gamma_star: float, gamma_m: float):
    """Level-one crossings of a quasi-sinusoidal ``g`` around its peak.

    Returns ``None`` when ``g(gamma_star) < 1`` (the certificate fails).
    Tangency returns the degenerate window ``(gamma_star, gamma_star)``. If
    ``g`` is still above one at ``gamma_m`` the upper end is ``gamma_m``;
    if ``g`` is infinite immediately right of zero the lower end is zero.
    """
    peak = g(gamma_star)
    if peak < 1.0:
        return None
    if peak == 1.0:
        return gamma_star, gamma_star

    def h(x):
        v = g(x)
        return 1e300 if math.isinf(v) else v - 1.0

    first = gamma_star / SCAN_POINTS
    if math.isinf(g(first)) and math.isinf(g(first * 1e-6)):
        gmin = 0.0
    else:
        gmin = find_root(h, 0.0, gamma_star)
    if h(gamma_m) >= 0.0:
        gmax = gamma_m
    else:
        gmax = find_root(h, gamma_star, gamma_m, from_right=True)
    return gmin, gmax


def check_f_l_monotone(bounds: RegionBounds, gamma_min: float, gamma_max: float, points: int = SCAN_POINTS) -> None:
    xs = np.linspace(gamma_min, gamma_max, points + 1)
    vals = np.array([bounds.f_l(x) for x in xs])
    drops = np.diff(vals) < -1e-12 * np.maximum(np.abs(vals[:-1]), 1e-300)
    if np.any(drops):
        k = int(np.argmax(drops))
        raise WindowError(
            f"f_l is not monotonically increasing on the window (drops after gamma={xs[k]:.6g}); "
            "the energy-window construction requires it"
        )


def energy_window(bounds: RegionBounds, gamma_min: float, gamma_max: float) -> tuple[float, float]:
    """``(f_l(gamma_min), max of f_r over [gamma_min, gamma_max])``."""
    check_f_l_monotone(bounds, gamma_min, gamma_max)
    f_l_min = bounds.f_l(gamma_min)
    _, f_r_max = grid_golden_max(bounds.f_r, gamma_min, gamma_max)
    return f_l_min, f_r_max


def _constrained_extremum(value, slack, lo, hi, maximize):
    """Extremum of ``value`` over ``{x in [lo, hi] : slack(x) >= 0}``."""
    xs = np.linspace(lo, hi, SCAN_POINTS + 1)
    tol = 1e-12

    def shifted(x):
        return slack(x) + tol * max(1.0, x * x)

    def ok(x):
        return shifted(x) >= 0.0

    cands = [x for x in xs if ok(x)]
    # feasibility boundaries
    for a, b in zip(xs[:-1], xs[1:]):
        if ok(a) != ok(b):
            r = bisect(shifted, a, b)
            for x in (r - ROOT_TOL, r, r + ROOT_TOL):
                if lo <= x <= hi and ok(x):
                    cands.append(x)
    if not cands:
        raise WindowError("feasible set of the state-window problem is empty")
    vals = [value(x) for x in cands]
    k = int(np.argmax(vals) if maximize else np.argmin(vals))
    best_x, best = cands[k], vals[k]
    # interior refinement between grid nodes
    step = (hi - lo) / SCAN_POINTS
    a, b = max(lo, best_x - step), min(hi, best_x + step)
    if b > a and ok(a) and ok(b):
        sign = 1.0 if maximize else -1.0
        x, fx = golden_max(lambda t: sign * value(t), a, b)
        if ok(x) and sign * fx > sign * best:
            best = sign * fx
    return float(best)


def state_window(bounds: RegionBounds, f_l_min: float, f_r_max: float, gamma_min: float, gamma_max: float):
    """Radii ``(gamma_l, gamma_r)`` of the balls enclosing/enclosed by the sublevel sets."""
    gamma_l = _constrained_extremum(
        lambda x: math.sqrt(f_l_min / bounds.alpha_lower(x)),
        lambda x: x * x - f_l_min / bounds.alpha_lower(x),
        gamma_min, gamma_max, maximize=False,
    )
    gamma_r = _constrained_extremum(
        lambda x: math.sqrt(f_r_max / bounds.alpha_upper(x)),
        lambda x: x * x - f_r_max / bounds.alpha_upper(x),
        gamma_min, gamma_max, maximize=True,
    )
    return gamma_l, gamma_r


def certify(bounds: RegionBounds, gamma_star: float) -> Window | None:
    """Full window construction, or ``None`` if ``g(gamma_star) < 1``."""
    cross = solve_crossings(bounds.g, gamma_star, bounds.gamma_m)
    if cross is None:
        return None
    gmin, gmax = cross
    f_l_min, f_r_max = energy_window(bounds, gmin, gmax)
    if gmin == 0.0:
        gamma_l = 0.0
        _, gamma_r = state_window(bounds, 0.0, f_r_max, 0.0, gmax)
    else:
        gamma_l, gamma_r = state_window(bounds, f_l_min, f_r_max, gmin, gmax)
    return Window(gamma_star, gmin, gmax, f_l_min, f_r_max, gamma_l, gamma_r)


def roa_window(bounds: RegionBounds) -> tuple[float, float]:
    """``(f_r_max, gamma_r)`` for a decrease condition holding everywhere (``mu = 0``)."""
    if any(bounds.mu(x) != 0.0 for x in np.linspace(0.0, bounds.gamma_m, 11)):
        raise WindowError("roa_window requires mu identically zero")
    _, f_r_max = grid_golden_max(bounds.f_r, 0.0, bounds.gamma_m)
    gamma_r = _constrained_extremum(
        lambda x: math.sqrt(f_r_max / bounds.alpha_upper(x)),
        lambda x: x * x - f_r_max / bounds.alpha_upper(x),
        0.0, bounds.gamma_m, maximize=True,
    )
    return f_r_max, gamma_r


def invariance_chain(bounds: RegionBounds, window: Window, chi: float, rtol: float = 1e-9, max_iter: int = 100_000):
    """Replays the nested-sublevel-set argument starting from energy ``chi``.

    Repeatedly takes the smallest ``gamma`` in the window with
    ``f_r(gamma) = chi`` and replaces ``chi`` by ``f_l(gamma)``. Returns the
    sequence of levels and whether it reached ``f_l_min`` within ``rtol``.
    """
    lo, hi = window.gamma_min, window.gamma_max
    if not window.f_l_min * (1 - 1e-12) <= chi <= window.f_r_max * (1 + 1e-12):
        raise WindowError(f"chi={chi} outside [{window.f_l_min}, {window.f_r_max}]")
    target = window.f_l_min
    levels = [chi]
    for _ in range(max_iter):
        if chi <= target * (1 + rtol) + 1e-300:
            return levels, True
        fn = lambda x: bounds.f_r(x) - chi
        if fn(lo) >= 0:
            gamma1 = lo
        else:
            gamma1 = find_root(fn, lo, hi)
        nxt = bounds.f_l(gamma1)
        if nxt >= chi:
            return levels, False
        chi = max(nxt, target)
        levels.append(chi)
    return levels, False
