import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kurasync import oracle, rplf
from kurasync.errors import DomainError, WindowError
from kurasync.rplf import RegionBounds


def test_kappa_examples():
    assert rplf.kappa(0.0, 0.3) == pytest.approx(math.cos(0.3))
    assert rplf.kappa(0.0, 0.0) == 1.0
    assert rplf.kappa(math.pi / 2, 0.0) == pytest.approx(2 / math.pi)
    g = np.linspace(0.01, 3.0, 50)
    np.testing.assert_allclose(rplf.kappa(g, 0.0), np.sin(g) / g, rtol=1e-12)


def test_kappa_matches_sinc_form():
    g, dl = 0.8, 0.2
    expected = math.sin(g / 2) / (g / 2) * math.cos(g / 2 + dl)
    assert rplf.kappa(g, dl) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("g, dl", [(-0.1, 0.0), (math.pi - 0.2 + 1e-6, 0.1), (3.5, 0.0)])
def test_kappa_domain(g, dl):
    with pytest.raises(DomainError):
        rplf.kappa(g, dl)


@pytest.mark.parametrize("dl", [0.0, 0.1168, 0.5, 1.2])
def test_kappa_strictly_decreasing(dl):
    g = np.linspace(0, math.pi - 2 * dl, 1000)
    assert np.all(np.diff(rplf.kappa(g, dl)) < 1e-12)


def test_f_pq_examples():
    g = np.linspace(0, math.pi, 40)
    np.testing.assert_allclose(rplf.f_pq(g, 1, 1, 0.0), np.sin(g), atol=1e-12)
    assert rplf.f_pq(0.0, 2.5, 1.0, 0.2) == 0.0
    assert rplf.f_pq(1.0, 2.5, 1.0, 0.0) == pytest.approx(math.sin(1.0) ** 2.5)


@pytest.mark.parametrize("p, q, dl", [(1, 1, 0.0), (2.5, 1, 0.0), (2.5, 1, 0.3), (1, 2, 0.1), (3, 1, 0.7)])
def test_f_pq_unimodal_with_zero_ends(p, q, dl):
    end = math.pi - 2 * dl
    assert rplf.f_pq(end, p, q, dl) == pytest.approx(0.0, abs=1e-12)
    vals = rplf.f_pq(np.linspace(0, end, 10_000), p, q, dl)
    signs = np.sign(np.diff(vals))
    signs = signs[signs != 0]
    assert np.count_nonzero(np.diff(signs)) == 1


def test_gamma_star_values():
    assert rplf.solve_gamma_star(1, 1, 0.0) == pytest.approx(math.pi / 2, abs=1e-12)
    g = rplf.solve_gamma_star(2.5, 1, 0.0)
    assert math.tan(g) == pytest.approx(5 / 3 * g, rel=1e-8)
    assert g == pytest.approx(1.054, abs=2e-3)  # the quoted 1.054 is rounded; exact root 1.05279
    gs = rplf.solve_gamma_star(1, 2, 0.0)
    assert math.tan(gs) == pytest.approx(-gs, rel=1e-8)
    assert gs == pytest.approx(2.0288, abs=1e-4)


@pytest.mark.parametrize("dl", [0.0, 0.1168, 0.1395, 0.6])
def test_gamma_star_vs_grid(dl):
    g = rplf.solve_gamma_star(2.5, 1, dl)
    assert g < math.pi / 2 - dl
    x, _ = oracle.grid_extremum(lambda t: t * float(oracle.kappa(t, dl)) ** 2.5, 0, math.pi - 2 * dl)
    assert g == pytest.approx(x, abs=1e-4)


def test_gamma_star_rejects_bad_exponents():
    with pytest.raises(DomainError):
        rplf.solve_gamma_star(0, 1, 0.0)


def test_crossings_arcsin():
    lo, hi = rplf.solve_crossings(lambda g: math.sin(g) / 0.5, math.pi / 2, math.pi)
    assert lo == pytest.approx(math.pi / 6, abs=1e-9)
    assert hi == pytest.approx(5 * math.pi / 6, abs=1e-9)


def test_crossings_tangency_and_failure():
    assert rplf.solve_crossings(math.sin, math.pi / 2, math.pi) == (math.pi / 2, math.pi / 2)
    assert rplf.solve_crossings(lambda g: 0.9 * math.sin(g), math.pi / 2, math.pi) is None


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 0.95))
def test_crossings_level_one(c):
    g = lambda x: math.sin(x) / c
    lo, hi = rplf.solve_crossings(g, math.pi / 2, math.pi)
    assert g(lo) == pytest.approx(1.0, abs=1e-9)
    assert g(hi) == pytest.approx(1.0, abs=1e-9)
    inside = np.linspace(lo, hi, 200)[1:-1]
    assert all(g(x) > 1 for x in inside)


def constant_bounds(al, au, mu_scale, dl=0.0, gm=None):
    gm = math.pi - 2 * dl if gm is None else gm
    return RegionBounds(lambda g: al, lambda g: au, lambda g: mu_scale / float(rplf.kappa(g, dl)), gm)


def test_energy_window_constant_bounds():
    b = constant_bounds(1.0, 1.0, 0.3)
    lo, hi = rplf.solve_crossings(b.g, math.pi / 2, b.gamma_m)
    f_l, f_r = rplf.energy_window(b, lo, hi)
    assert f_l == pytest.approx(b.f_l(lo))
    assert f_r == pytest.approx(hi * hi, rel=1e-9)


def test_f_l_monotonicity_enforced():
    b = RegionBounds(lambda g: 1.0, lambda g: 1.0, lambda g: 1.0 / (1 + g), math.pi)
    with pytest.raises(WindowError):
        rplf.energy_window(b, 0.5, 2.0)


def test_state_window_equal_alphas():
    b = constant_bounds(0.7, 0.7, 0.2)
    lo, hi = rplf.solve_crossings(b.g, math.pi / 2, b.gamma_m)
    f_l, f_r = rplf.energy_window(b, lo, hi)
    gl, gr = rplf.state_window(b, f_l, f_r, lo, hi)
    assert gl == pytest.approx(lo, abs=1e-9)
    assert gr == pytest.approx(hi, abs=1e-9)


def test_state_window_ratio():
    b = constant_bounds(0.5, 2.0, 0.05)
    lo, hi = rplf.solve_crossings(b.g, math.pi / 2, b.gamma_m)
    f_l, f_r = rplf.energy_window(b, lo, hi)
    gl, gr = rplf.state_window(b, f_l, f_r, lo, hi)
    assert gl == pytest.approx(lo, abs=1e-9)
    assert gr == pytest.approx(hi * math.sqrt(0.25), abs=1e-9)


def test_roa_window_constant():
    b = RegionBounds(lambda g: 0.3, lambda g: 1.2, lambda g: 0.0, 2.5)
    f_r, gr = rplf.roa_window(b)
    assert f_r == pytest.approx(2.5 ** 2 * 0.3)
    assert gr == pytest.approx(2.5 * math.sqrt(0.25))


def test_roa_window_kappa_shape():
    b = RegionBounds(lambda g: float(rplf.kappa(g, 0.0)) * 0.5, lambda g: 0.5, lambda g: 0.0, math.pi)
    f_r, gr = rplf.roa_window(b)
    gs = rplf.solve_gamma_star(1, 2, 0.0)
    assert f_r == pytest.approx(gs * math.sin(gs) * 0.5, rel=1e-10)
    assert gr == pytest.approx(gs * math.sqrt(math.sin(gs) / gs), rel=1e-8)


def test_roa_window_requires_zero_mu():
    with pytest.raises(WindowError):
        rplf.roa_window(constant_bounds(1, 1, 0.1))


def test_certify_properties():
    b = constant_bounds(0.4, 1.0, 0.1, dl=0.2)
    gs = math.pi / 2 - 0.2
    w = rplf.certify(b, gs)
    assert 0 < w.gamma_min < gs < w.gamma_max <= b.gamma_m
    assert w.f_l_min <= w.f_r_max
    assert w.gamma_l <= w.gamma_r
    for x in np.linspace(w.gamma_min, w.gamma_max, 200):
        assert b.f_l(x) <= b.f_r(x) * (1 + 1e-9)


def test_certify_fails_cleanly():
    assert rplf.certify(constant_bounds(1, 1, 2.0), math.pi / 2) is None


def test_invariance_chain_terminates():
    b = constant_bounds(0.4, 1.0, 0.1)
    w = rplf.certify(b, math.pi / 2)
    for chi in np.linspace(w.f_l_min, w.f_r_max, 7):
        levels, ok = rplf.invariance_chain(b, w, chi)
        assert ok
        assert levels[-1] == pytest.approx(w.f_l_min, rel=1e-6)
        assert all(x >= y for x, y in zip(levels, levels[1:]))
