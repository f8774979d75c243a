import csv
import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from kurasync import certificates as C
from kurasync import energy, kernel, simulate as S
from kurasync.errors import KurasyncError, SimulationDiverged
from kurasync.network import PowerNetwork, build_incidence

from conftest import solved


def rng(seed=0):
    return np.random.Generator(np.random.Philox(seed))


def test_norms_examples(set1):
    net, _ = set1
    pair = build_incidence(net)
    assert S.norms(np.full(9, 0.4), pair) == pytest.approx((0, 0, 0, 0), abs=1e-14)
    two = build_incidence(PowerNetwork(2, ((0, 1, 1.0),), (1.0, 1.0)))
    assert S.norms(np.array([1.0, 0.0]), two) == (1.0, 1.0, 1.0, 1.0)


def test_norm_chain(set2):
    net, _ = set2
    pair = build_incidence(net)
    for x in rng(1).normal(size=(500, 9)):
        nc, nl, nci, nli = S.norms(x, pair)
        assert nli <= nci + 1e-14 and nci <= nc + 1e-14
        assert S.norm_c(x) == pytest.approx(nc, rel=1e-12)
        assert S.norm_l(x, net) == pytest.approx(nl, rel=1e-12)


def test_rhs_examples(set1):
    net, eq = set1
    np.testing.assert_array_equal(S.rhs(net, eq, np.zeros(9)), 0.0)
    np.testing.assert_allclose(S.rhs(net, eq, np.full(9, 0.8)), 0.0, atol=1e-13)


def test_zero_trajectory(set1):
    net, eq = set1
    traj = S.integrate(net, eq, np.zeros(9), None, (0.0, 2.0))
    assert np.all(traj.states == 0.0) and np.all(traj.freq == 0.0)
    assert len(traj.times) == 2001
    np.testing.assert_allclose(np.diff(traj.times), 1e-3, atol=1e-12)


def test_rhs_matches_short_integration(set2):
    net, eq = set2
    x0 = rng(2).uniform(-0.3, 0.3, 9)
    p = S.PiecewiseConstant(np.array([0.0]), rng(3).uniform(-1, 1, (1, 9)))
    f0 = S.rhs(net, eq, x0, p.values[0])
    errs = []
    for h in (1e-3, 5e-4, 2.5e-4):
        traj = S.integrate(net, eq, x0, p, (0.0, h), h)
        errs.append(np.max(np.abs((traj.states[1] - x0) / h - f0)))
        np.testing.assert_allclose(traj.freq[0], f0)
    # first-order agreement: halving h halves the error
    for a, b in zip(errs, errs[1:]):
        assert a / b == pytest.approx(2.0, rel=0.05)


def test_rk4_order(set1):
    net, eq = set1
    x0 = rng(4).uniform(-0.6, 0.6, 9)
    # steps well inside the RK4 stability region of the stiffest mode
    finals = [S.integrate(net, eq, x0, None, (0.0, 0.4), h).states[-1] for h in (0.01, 0.005, 0.0025)]
    e1 = np.linalg.norm(finals[0] - finals[1])
    e2 = np.linalg.norm(finals[1] - finals[2])
    assert math.log2(e1 / e2) >= 3.5


def test_disturbance_draws_are_keyed_per_node():
    a = S.DisturbanceSpec((0, 3), 2.0, seed=5)
    b = S.DisturbanceSpec((0,), 2.0, seed=5)
    va, vb = a.draws(40), b.draws(25)
    np.testing.assert_array_equal(va[:25, 0], vb[:, 0])
    assert np.all(np.abs(va) <= 2.0)
    assert not np.array_equal(va[:, 0], va[:, 1])
    assert not np.array_equal(a.draws(10), S.DisturbanceSpec((0, 3), 2.0, seed=6).draws(10))


def test_disturbance_schedule_alignment(set1):
    net, eq = set1
    spec = S.DisturbanceSpec((0,), 1.0, hold_interval=0.1005, start_time=0.0)
    with pytest.raises(KurasyncError, match="grid"):
        S.integrate(net, eq, np.zeros(9), spec.schedule(9, 1.0), (0.0, 1.0))


def test_disturbance_is_piecewise_constant(set1):
    net, eq = set1
    spec = S.DisturbanceSpec((0,), 1.0, start_time=0.5)
    traj, rep = S.run_disturbance_scenario(net, eq, spec, horizon=1.5)
    p = traj.p[:, 0]
    assert np.all(p[traj.times < 0.5 - 1e-9] == 0)
    k = np.searchsorted(traj.times, 0.5 - 1e-9)
    blocks = p[k:-1].reshape(-1, 100)
    assert np.all(blocks == blocks[:, :1])
    assert rep.realized_sup["p_inf"] == pytest.approx(np.abs(p).max())


def test_zero_disturbance_stays_on_subspace(set1):
    net, eq = set1
    traj, rep = S.run_disturbance_scenario(net, eq, S.DisturbanceSpec((0,), 0.0), horizon=8.0)
    assert rep.max_norm_c == 0.0 and rep.stable
    assert rep.settle_time == 0.0


def test_settle_time_detected(set1):
    net, eq = set1
    x0 = np.zeros(9)
    x0[0] = 0.2
    traj, rep = S.run_disturbance_scenario(net, eq, S.DisturbanceSpec((0,), 0.5, start_time=8.0), horizon=9.0, x0=x0)
    assert 0 < rep.settle_time < 8.0
    assert traj.events == sorted(traj.events)


def test_determinism(set2):
    net, eq = set2
    spec = S.DisturbanceSpec((0,), 5.0, seed=9, start_time=1.0)
    t1, _ = S.run_disturbance_scenario(net, eq, spec, horizon=4.0)
    t2, _ = S.run_disturbance_scenario(net, eq, spec, horizon=4.0)
    assert np.array_equal(t1.states, t2.states) and np.array_equal(t1.freq, t2.freq)


def test_divergence_reported(set1):
    net, eq = set1
    bad = S.PiecewiseConstant(np.array([0.5]), np.full((1, 9), np.inf))
    with pytest.raises(SimulationDiverged) as exc:
        S.integrate(net, eq, np.zeros(9), bad, (0.0, 1.0))
    assert exc.value.last_time == pytest.approx(0.5)


def test_disturbance_with_certificate(set1_passing):
    net, eq = set1_passing
    r = C.criterion_I(net, eq, C.DisturbanceBound(1.0, (0,)))
    spec = S.DisturbanceSpec((0,), 1.0, seed=2, start_time=2.0)
    traj, rep = S.run_disturbance_scenario(net, eq, spec, horizon=10.0, certificate=r)
    assert rep.max_norm_after_injection <= r.window.gamma_r
    assert rep.entry_time is not None
    assert rep.ultimately_bounded
    assert rep.freq_sup_after_entry <= r.varpi_bound


def test_converges_from_small_state(set1):
    net, eq = set1
    x0 = rng(5).uniform(-0.3, 0.3, 9)
    traj = S.integrate(net, eq, x0, None, (0.0, 20.0))
    nc = traj.norm_c()
    assert nc[-1] < 1e-6
    V = energy.v_quadratic(net, traj.states)
    assert np.all(np.diff(V) <= 1e-9 * V[:-1] + 1e-15)


def test_batch_matches_single(set2):
    net, eq = set2
    X0 = rng(6).uniform(-0.5, 0.5, (4, 9))
    seen = []
    out = S.integrate_batch(net, eq, X0, 1.0, chunk_steps=300, monitor=lambda t, X: seen.append((t[-1], X.shape)))
    for x0, xb in zip(X0, out):
        np.testing.assert_allclose(S.integrate(net, eq, x0, None, (0.0, 1.0)).states[-1], xb, atol=1e-13)
    assert seen[-1][0] == pytest.approx(1.0)
    assert sum(s[1][0] for s in seen) == 1000


def test_batch_disturbance_rows(set2):
    net, eq = set2
    X0 = np.zeros((2, 9))
    vals = np.zeros((3, 2, 9))
    vals[:, 1, 0] = [1.0, -1.0, 0.5]
    out = S.integrate_batch(net, eq, X0, 0.5, p_values=vals, hold_steps=100)
    assert np.all(out[0] == 0.0)
    sched = S.PiecewiseConstant(np.array([0.0, 0.1, 0.2, 0.3]), np.vstack([vals[:, 1, :], np.zeros((1, 9))]))
    np.testing.assert_allclose(S.integrate(net, eq, X0[1], sched, (0.0, 0.5)).states[-1], out[1], atol=1e-13)


@pytest.mark.parametrize("name", ["ieee9_set1", "ieee9_set2"])
def test_immediate_reclose(name):
    net, eq = solved(name, seed=0)
    trip = S.TripSpec((0, 3), 1.0, "at_time", 1.0)
    traj, rep = S.run_line_trip_scenario(net, eq, trip, C.roa_I(net, eq), C.roa_II(net, eq), horizon=3.0)
    assert rep.reclose_time == 1.0
    assert np.max(np.abs(traj.states)) == 0.0 and rep.converged


def test_trip_never_reclosed(set1):
    net, eq = set1
    trip = S.TripSpec((0, 3), 1.0, "never")
    traj, rep = S.run_line_trip_scenario(net, eq, trip, C.roa_I(net, eq), C.roa_II(net, eq), horizon=3.0)
    assert rep.reclose_time is None and not rep.converged
    assert rep.T1 is not None and rep.T2 is not None


def test_trip_spec_validation():
    with pytest.raises(ValueError):
        S.TripSpec((0, 3), 1.0, "sometimes")
    with pytest.raises(ValueError):
        S.TripSpec((0, 3), 1.0, "at_time")


@pytest.mark.parametrize("name, first", [("ieee9_set1", "C2"), ("ieee9_set2", "C1")])
def test_trip_orderings(name, first):
    net, eq = solved(name, seed=0)
    traj, rep = S.run_line_trip_scenario(net, eq, S.TripSpec((0, 3), 5.0), C.roa_I(net, eq), C.roa_II(net, eq))
    labels = [lab for _, lab in traj.events]
    assert labels[0] == "trip" and labels[1] == first and labels[-1] == "reclose"
    assert rep.converged and rep.energy_monotone
    # crossing times are interpolated between the bracketing grid points
    k = int(rep.T1 / 1e-3)
    nc = traj.norm_c()
    assert nc[k] <= rep.gamma_r_I <= nc[k + 1]


def test_csv_exports(tmp_path, set1):
    net, eq = set1
    traj, _ = S.run_line_trip_scenario(net, eq, S.TripSpec((0, 3), 0.5), C.roa_I(net, eq), C.roa_II(net, eq), horizon=2.0)
    S.write_trajectory_csv(tmp_path / "t.csv", traj, net, eq, every=5)
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == f"# {S.CSV_VERSION}"
    header = next(csv.reader([lines[1]]))
    assert header[0] == "t" and header[1] == "delta_1" and header[10] == "ddelta_1"
    assert header[-4:] == ["V_quadratic", "V_potential", "norm_c", "norm_l"]
    assert len(lines) - 2 == len(traj.times[::5])
    S.write_long_csv(tmp_path / "l.csv", traj, net, eq)
    rows = (tmp_path / "l.csv").read_text().splitlines()
    assert rows[1] == "t,series,value"
    S.write_events(tmp_path / "e.json", traj)
    ev = json.loads((tmp_path / "e.json").read_text())
    assert [e["event"] for e in ev][0] == "trip"


def test_backends_agree(set2):
    net, eq = set2
    if kernel.compiled_rk4_advance is None:
        pytest.skip("compiled backend not built")
    th = eq.theta_o[net.tails] - eq.theta_o[net.heads]
    X = rng(7).uniform(-1, 1, (5, 9))
    P = rng(8).uniform(-2, 2, (5, 9))
    outs = []
    for fn in (kernel.python_rk4_advance, kernel.compiled_rk4_advance):
        x = X.copy()
        rec = np.empty((50, 5, 9))
        fn(x, net.tails, net.heads, net.weights, th, 1 / net.d_array, P, 1e-3, 50, rec)
        outs.append((x, rec))
    np.testing.assert_allclose(outs[0][0], outs[1][0], rtol=0, atol=1e-13)
    np.testing.assert_allclose(outs[0][1], outs[1][1], rtol=0, atol=1e-13)
    np.testing.assert_array_equal(outs[0][1][-1], outs[0][0])


def test_pure_python_switch():
    env = dict(os.environ, KURASYNC_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from kurasync import kernel; print(kernel.BACKEND)"], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
