import math

import numpy as np
import pytest

from kurasync import certificates as C
from kurasync import oracle, rplf


def test_grid_extremum_examples():
    x, v = oracle.grid_extremum(math.sin, 0, math.pi)
    assert x == pytest.approx(math.pi / 2, abs=1e-4) and v == pytest.approx(1.0, abs=1e-8)
    x, _ = oracle.grid_extremum(lambda g: g * g * float(oracle.kappa(g, 0.0)), 0, math.pi)
    assert x == pytest.approx(rplf.solve_gamma_star(1, 2, 0.0), abs=1e-6)
    x, _ = oracle.grid_extremum(lambda g: rplf.f_pq(g, 2.5, 1, 0.0), 0, math.pi)
    assert x == pytest.approx(rplf.solve_gamma_star(2.5, 1, 0.0), abs=1e-6)


def test_grid_extremum_rejects_coarse_grid():
    with pytest.raises(ValueError):
        oracle.grid_extremum(math.sin, 0, 1, points=10)


def test_grid_crossings_arcsin():
    lo, hi = oracle.grid_crossings(lambda g: math.sin(g) / 0.5, 0, math.pi)
    assert lo == pytest.approx(math.pi / 6, abs=1e-6)
    assert hi == pytest.approx(5 * math.pi / 6, abs=1e-6)
    assert oracle.grid_crossings(lambda g: 0.5 * math.sin(g), 0, math.pi) is None


def test_oracle_kappa_independent_agreement():
    g = np.linspace(0, 2.5, 101)
    np.testing.assert_allclose(oracle.kappa(g, 0.3), rplf.kappa(g, 0.3), rtol=1e-12)


def test_decrease_zero_disturbance(set1):
    net, eq = set1
    bound = C.DisturbanceBound.zero()
    r = C.criterion_I(net, eq, bound)
    out = oracle.mc_decrease_check(net, eq, r, bound, samples=10_000, seed=1)
    assert out.violations == 0 and out.mu == 0.0


def test_decrease_passing_set1(set1_passing):
    net, eq = set1_passing
    bound = C.DisturbanceBound(1.0, (0,))
    r = C.criterion_I(net, eq, bound)
    assert r.passed
    assert oracle.mc_decrease_check(net, eq, r, bound, samples=10_000, seed=2).violations == 0


def test_decrease_criterion_II(set1):
    net, eq = set1
    bound = C.DisturbanceBound(0.05, (0,))
    r = C.criterion_II(net, eq, bound)
    assert r.passed
    assert oracle.mc_decrease_check(net, eq, r, bound, samples=5_000, seed=3).violations == 0


def test_decrease_negative_control(set1_passing):
    net, eq = set1_passing
    bound = C.DisturbanceBound(1.0, (0,))
    r = C.criterion_I(net, eq, bound)
    out = oracle.mc_decrease_check(net, eq, r, bound, samples=5_000, seed=4, mu=0.0)
    assert out.violations > 0


def test_eigen_trivial_cases():
    I = np.eye(4)
    ev = oracle._desc(I @ I)
    np.testing.assert_allclose(ev, 1.0)
    X, Y = np.diag([3.0, 1.0, 2.0]), np.diag([0.5, 4.0, 1.0])
    np.testing.assert_allclose(oracle._desc(X @ Y), sorted([1.5, 4.0, 2.0], reverse=True))


def test_eigen_inequalities_random():
    rep = oracle.eigen_inequality_check(trials=1000, n_max=6, seed=5, q_bar_trials=300)
    assert rep.checks > 10_000
    assert rep.violations == 0
    assert rep.q_bar_violations == 0


def test_oracle_solver_equivalence_on_certificate(set1_passing):
    net, eq = set1_passing
    r, bounds = C.criterion_I(net, eq, C.DisturbanceBound(1.0, (0,)), return_bounds=True)
    lo, hi = oracle.grid_crossings(bounds.g, 1e-6, bounds.gamma_m - 1e-6)
    assert lo == pytest.approx(r.window.gamma_min, abs=1e-4)
    assert hi == pytest.approx(r.window.gamma_max, abs=1e-4)
    _, f_r = oracle.grid_extremum(bounds.f_r, r.window.gamma_min, r.window.gamma_max)
    assert f_r == pytest.approx(r.window.f_r_max, rel=1e-6)
