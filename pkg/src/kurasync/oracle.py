"""Brute-force validators for the test suite.

Nothing here calls the package's root finders, optimisers, energy functions or
integration kernels; every quantity is rebuilt from dense scans, explicit
loops and full eigendecompositions so that agreement is evidence.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

REL_TOL = 1e-9


def _kappa(g, dl):
    g = np.asarray(g, float)
    with np.errstate(invalid="ignore", divide="ignore"):
        val = (np.sin(g + dl) - math.sin(dl)) / g
    return np.where(g == 0.0, math.cos(dl), val)


def kappa(g, dl):
    """Elementary ``(sin(g + dl) - sin dl) / g`` with the limit at zero."""
    return _kappa(g, dl)


def _scan(f, x):
    """Evaluate ``f`` on the grid, vectorised when ``f`` accepts arrays."""
    try:
        y = np.asarray(f(x), float)
        if y.shape == x.shape:
            return y
    except (TypeError, ValueError):
        pass
    return np.array([f(v) for v in x], float)


def grid_extremum(f, lo, hi, points=100_001):
    """Dense scan plus a three-point parabola through the best sample."""
    if points < 1000:
        raise ValueError("need at least 1000 points")
    x = np.linspace(lo, hi, points)
    y = _scan(f, x)
    k = int(np.nanargmax(y))
    if 0 < k < points - 1:
        y0, y1, y2 = y[k - 1], y[k], y[k + 1]
        den = y0 - 2 * y1 + y2
        if den < 0:
            step = x[1] - x[0]
            shift = 0.5 * (y0 - y2) / den
            xs = x[k] + shift * step
            return float(xs), float(f(xs))
    return float(x[k]), float(y[k])


def grid_crossings(g, lo, hi, level=1.0, points=100_001):
    """Outermost points of ``{g >= level}`` on a grid, refined by interpolation."""
    x = np.linspace(lo, hi, points)
    y = _scan(g, x) - level
    inside = np.nonzero(y >= 0)[0]
    if inside.size == 0:
        return None
    i, j = int(inside[0]), int(inside[-1])

    def interp(a, b):
        if not np.isfinite(y[a]) or not np.isfinite(y[b]) or y[a] == y[b]:
            return float(x[b] if y[b] >= 0 else x[a])
        return float(x[a] + (0 - y[a]) * (x[b] - x[a]) / (y[b] - y[a]))

    left = float(x[0]) if i == 0 else interp(i - 1, i)
    right = float(x[-1]) if j == points - 1 else interp(j, j + 1)
    return left, right


# -- dense model rebuilt from scratch -----------------------------------------

@dataclass
class _Dense:
    n: int
    A: np.ndarray
    d: np.ndarray
    theta: np.ndarray
    edges: list = field(default_factory=list)

    @classmethod
    def of(cls, net, eq):
        A = np.zeros((net.n, net.n))
        for i, j, a in net.edges:
            A[i, j] = A[j, i] = a
        th = np.asarray(eq.theta_o, float)
        return cls(net.n, A, np.asarray(net.d, float), th, [(i, j) for i, j, _ in net.edges])

    def field(self, x, p):
        n = self.n
        out = np.array(p, float, copy=True)
        for i in range(n):
            for j in range(n):
                if self.A[i, j]:
                    tij = self.theta[i] - self.theta[j]
                    out[i] -= self.A[i, j] * (math.sin(x[i] - x[j] + tij) - math.sin(tij))
        return out / self.d

    def grad_quadratic(self, x):
        dsum = self.d.sum()
        g = np.zeros(self.n)
        for k in range(self.n):
            for j in range(self.n):
                g[k] += self.d[k] * self.d[j] * (x[k] - x[j]) / dsum
        return g

    def grad_potential(self, x):
        g = np.zeros(self.n)
        for i in range(self.n):
            for j in range(self.n):
                if self.A[i, j]:
                    tij = self.theta[i] - self.theta[j]
                    g[i] += self.A[i, j] * (math.sin(x[i] - x[j] + tij) - math.sin(tij))
        return g

    def norm_c(self, x):
        return math.sqrt(sum((x[i] - x[j]) ** 2 for i in range(self.n) for j in range(i + 1, self.n)))

    def norm_l(self, x):
        return math.sqrt(sum((x[i] - x[j]) ** 2 for i, j in self.edges))

    def lam2(self):
        L = np.diag(self.A.sum(axis=1)) - self.A
        return float(np.sort(np.linalg.eigvalsh(L))[1])

    def lam_s_q(self):
        m = len(self.edges)
        B = np.zeros((self.n, m))
        a = np.zeros(m)
        for k, (i, j) in enumerate(self.edges):
            B[i, k], B[j, k] = 1.0, -1.0
            a[k] = self.A[i, j]
        Q = np.diag(a) @ B.T @ np.diag(1 / self.d) @ B @ np.diag(a)
        ev = np.linalg.eigvalsh(Q)
        return float(ev[ev > 1e-9 * max(1.0, abs(ev).max())].min())


@dataclass
class DecreaseCheck:
    samples: int
    violations: int
    mu: float
    gamma: float
    worst_vdot: float


def _support_vertices(support, p_d):
    support = sorted(support)
    for signs in itertools.product((-1.0, 1.0), repeat=len(support)):
        yield support, np.array(signs) * p_d


def mc_decrease_check(net, eq, certificate, bound, samples=10_000, seed=0, gamma=None, mu_gamma=None, mu=None):
    """Counts ``Vdot >= 0`` on the annulus ``mu < ||.|| <= gamma``.

    ``gamma`` defaults to the certificate's ``gamma_max``; ``mu_gamma`` picks
    the radius at which ``mu`` is evaluated (defaults to ``gamma``). Passing a
    ``gamma`` beyond the window with ``mu_gamma`` left at the window edge is the
    negative control, as is an explicit inner radius ``mu`` below the
    certified one (states near the equilibrium subspace, where a disturbance
    at its bound can raise the energy).
    """
    dense = _Dense.of(net, eq)
    det = certificate.details
    crit = det["norm"]
    dl = det["delta_l_bar"]
    win = certificate.window
    if gamma is None:
        gamma = win.gamma_max if win is not None else det["gamma_star"]
    mg = gamma if mu_gamma is None else mu_gamma
    w = det["disturbance_norm"]
    if crit == "c":
        lam = dense.lam2()
        mu_c = 0.0 if w == 0 else net.n * w / (float(kappa(mg, dl)) * lam * dense.d.sum())
        norm, grad = dense.norm_c, dense.grad_quadratic
    else:
        lam = dense.lam_s_q()
        a = np.array([dense.A[i, j] for i, j in dense.edges])
        mu_c = 0.0 if w == 0 else w * a.max() / (lam * float(kappa(mg, dl)) ** 2 * a.min())
        norm, grad = dense.norm_l, dense.grad_potential
    mu = mu_c if mu is None else mu
    rng = np.random.Generator(np.random.Philox(seed))
    vertices = list(_support_vertices(bound.support, bound.p_d)) if bound.p_d > 0 else [((), np.zeros(0))]
    lo = min(mu, gamma)
    violations = 0
    worst = -math.inf
    for _ in range(samples):
        x = rng.normal(size=net.n)
        x -= x.mean()
        r = rng.uniform(lo, gamma)
        if r <= mu:
            continue
        x *= r / norm(x)
        sup, vals = vertices[rng.integers(len(vertices))]
        p = np.zeros(net.n)
        for k, v in zip(sup, vals):
            p[k] = v
        vdot = float(grad(x) @ dense.field(x, p))
        worst = max(worst, vdot)
        if vdot >= 0:
            violations += 1
    return DecreaseCheck(samples, violations, mu, gamma, worst)


# -- eigenvalue inequalities --------------------------------------------------

@dataclass
class EigenReport:
    trials: int
    checks: int
    violations: int
    q_bar_checks: int = 0
    q_bar_violations: int = 0


def _random_psd(rng, k, rank=None):
    rank = k if rank is None else rank
    G = rng.normal(size=(k, rank))
    return G @ G.T


def _desc(M):
    return np.sort(np.linalg.eigvals(M).real)[::-1]


def eigen_inequality_check(trials=1000, n_max=6, seed=0, q_bar_trials=200):
    """Product-eigenvalue bounds on random PSD pairs and the ``Q_bar`` bound."""
    rng = np.random.Generator(np.random.Philox(seed))
    rep = EigenReport(trials, 0, 0)
    for _ in range(trials):
        k = int(rng.integers(1, n_max + 1))
        X = _random_psd(rng, k, int(rng.integers(1, k + 1)))
        Y = _random_psd(rng, k, int(rng.integers(1, k + 1)))
        lx, ly, lxy = _desc(X), _desc(Y), _desc(X @ Y)
        scale = REL_TOL * max(1.0, lx[0] * ly[0])
        for i in range(1, k + 1):
            for j in range(1, k + 1):
                rep.checks += 1
                if i + j <= k + 1 and lxy[i + j - 2] > lx[j - 1] * ly[i - 1] + scale:
                    rep.violations += 1
                if i + j >= k + 1 and lxy[i + j - k - 1] < lx[j - 1] * ly[i - 1] - scale:
                    rep.violations += 1
    for _ in range(q_bar_trials):
        rep.q_bar_checks += 1
        if not _q_bar_instance(rng):
            rep.q_bar_violations += 1
    return rep


def _q_bar_instance(rng) -> bool:
    """One random network: ``lam_s(Q_bar) >= lam_s(Q) kappa(gamma) / max a``."""
    n = int(rng.integers(3, 7))
    edges = [(k, k + 1) for k in range(n - 1)]
    for i in range(n):
        for j in range(i + 2, n):
            if rng.uniform() < 0.4:
                edges.append((i, j))
    m = len(edges)
    a = rng.uniform(0.5, 3.0, m)
    d = rng.uniform(0.5, 2.0, n)
    theta = rng.uniform(-0.3, 0.3, n)
    B = np.zeros((n, m))
    for k, (i, j) in enumerate(edges):
        B[i, k], B[j, k] = 1.0, -1.0
    th_e = B.T @ theta
    dl = float(np.abs(th_e).max())
    gamma = rng.uniform(0.05, math.pi - 2 * dl - 0.05)
    x = rng.normal(size=n)
    u = B.T @ x
    if np.abs(u).max() > 0:
        x *= rng.uniform(0.0, 1.0) * gamma / np.abs(u).max()
    u = B.T @ x
    ap = np.where(np.abs(u) > 1e-12, (np.sin(u + th_e) - np.sin(th_e)) / np.where(u == 0, 1, u), np.cos(th_e))
    Q = np.diag(a) @ B.T @ np.diag(1 / d) @ B @ np.diag(a)
    S = np.diag(np.sqrt(ap / a))
    Qb = S @ Q @ S

    def lam_s(M):
        ev = np.linalg.eigvalsh(M)
        return ev[ev > 1e-9 * max(1.0, abs(ev).max())].min()

    return bool(lam_s(Qb) >= lam_s(Q) * float(kappa(gamma, dl)) / a.max() * (1 - 1e-9))
