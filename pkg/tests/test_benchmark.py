from __future__ import annotations

import csv

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qunt.benchmark import (
    BenchmarkCase,
    ConvergenceCell,
    Reference,
    compute_errors,
    convergence_study,
    error_metrics,
    graded_nodes,
    reference_solution,
    run_scheme,
    runtime_comparison,
    trend_diagnostics,
    write_errors_field_csv,
    write_errors_flux_csv,
    write_runtime_csv,
    write_trajectory_csv,
)
from qunt.benchmark import _stretched_coordinate
from qunt.pdesolver import integrate


@pytest.fixture(scope="module")
def short_case():
    return BenchmarkCase(tau=0.5)


@pytest.fixture(scope="module")
def small_ref(short_case):
    return reference_solution(short_case, nx_ref=401, dt_ref=1e-3, save_dt=5e-3)


def test_case_coefficients_positive_and_signals():
    c = BenchmarkCase()
    p = c.problem()
    u = np.linspace(0.5, 1.5, 101)
    assert np.all(p.kstar(u, 0.5 + 0 * u) > 0) and np.all(p.cstar(u, 0.5 + 0 * u) > 0)
    assert p.kstar(1.5, 0.5) == pytest.approx(1 + 0.91 * 1.5 + 600)
    assert p.cstar(1.0, 0.5) == pytest.approx(900 - 656 + 1e4 * np.exp(-5 * 0.25))
    assert c.u_left(3.0) == pytest.approx(0.5)
    assert c.u_right(6.0) == pytest.approx(1.5)
    with pytest.raises(ValueError):
        BenchmarkCase(nx=2)
    with pytest.raises(ValueError):
        BenchmarkCase(amp_right=1.5)


@given(n=st.integers(4, 500), a=st.floats(0.0, 0.99))
def test_graded_nodes_and_inverse(n, a):
    x = graded_nodes(n, a)
    assert x[0] == 0.0 and x[-1] == 1.0 and np.all(np.diff(x) > 0)
    np.testing.assert_allclose(_stretched_coordinate(x, a), np.arange(n + 1) / n, atol=1e-12)
    # end cells shrink by 1 - a, up to the cubic Taylor remainder of sin
    h = 1.0 / n
    assert (1 - a) * h - 1e-15 <= x[1] <= (1 - a) * h + a * (2 * np.pi) ** 2 * h**3 / 6 + 1e-15


def test_reference_sampling_is_exact_for_cubics_in_stretched_coordinate():
    nodes = graded_nodes(40, 0.8)
    s = _stretched_coordinate(nodes, 0.8)
    f = lambda s_: 1 + s_ - 2 * s_**2 + 0.7 * s_**3
    ref = Reference(np.array([0.0]), nodes, f(s)[None, :], np.zeros(1), np.zeros(1), 41, 1e-3,
                    5e-3, 0.8)
    xq = np.random.default_rng(0).uniform(0, 1, 200)
    np.testing.assert_allclose(ref.sample(xq)[0], f(_stretched_coordinate(xq, 0.8)), atol=1e-12)
    np.testing.assert_allclose(ref.sample(nodes)[0], f(s), atol=1e-13)


def test_reference_initial_level_and_cadence(short_case, small_ref):
    assert small_ref.times[0] == 0.0
    np.testing.assert_array_equal(small_ref.u[0], 1.0)
    np.testing.assert_allclose(np.diff(small_ref.times), 5e-3, rtol=1e-9)
    assert small_ref.times[-1] == pytest.approx(short_case.tau)
    np.testing.assert_allclose(small_ref.u[:, 0], short_case.u_left(small_ref.times), atol=1e-14)
    with pytest.raises(ValueError, match="saved reference level"):
        small_ref.index_of([0.0025])


def test_reference_for_constant_boundaries_is_constant():
    c = BenchmarkCase(tau=0.2, amp_left=0.0, amp_right=0.0)
    ref = reference_solution(c, nx_ref=101, dt_ref=1e-3)
    np.testing.assert_allclose(ref.u, 1.0, atol=1e-14)


def test_reference_cache_roundtrip(tmp_path, short_case):
    a = reference_solution(short_case, 101, 1e-3, cache_dir=tmp_path)
    files = list(tmp_path.glob("reference_*.npz"))
    assert len(files) == 1
    b = reference_solution(short_case, 101, 1e-3, cache_dir=tmp_path)
    np.testing.assert_array_equal(a.u, b.u)
    assert b.grading == a.grading and b.nx_ref == 101
    with pytest.raises(ValueError):
        reference_solution(short_case, 101, 3e-3)


def test_error_metrics_definitions():
    rng = np.random.default_rng(1)
    u = rng.normal(size=(7, 5))
    q = rng.normal(size=(7, 2))
    eps, xi = error_metrics(u, u, q, q)
    assert np.all(eps == 0) and np.all(xi == 0)
    eps, xi = error_metrics(u, u + 1e-3, q, q - 2e-3)
    np.testing.assert_allclose(eps, 1e-3, rtol=1e-9)
    np.testing.assert_allclose(xi, 2e-3, rtol=1e-9)
    with pytest.raises(ValueError):
        error_metrics(u, u[:-1], q, q)
    with pytest.raises(ValueError):
        error_metrics(u, u, q, q[:-1])


@given(seed=st.integers(0, 2**31 - 1), nt=st.integers(1, 30), m=st.integers(1, 20))
def test_eps_inf_bounds_every_time_level(seed, nt, m):
    rng = np.random.default_rng(seed)
    d = rng.normal(size=(nt, m))
    eps, _ = error_metrics(d, np.zeros_like(d), np.zeros(nt), np.zeros(nt))
    per_time_rms = np.sqrt(np.mean(d**2, axis=1))
    assert np.max(eps) >= np.max(per_time_rms) / np.sqrt(nt) - 1e-12
    assert np.all(eps >= 0)


def test_self_comparison_is_zero(short_case):
    traj = integrate(short_case.problem(), "qunt", 51, 5e-3, 100)
    q = np.column_stack([traj.flux_left, traj.flux_right])
    eps, xi = error_metrics(traj.u, traj.u.copy(), q, q.copy())
    assert np.all(eps == 0) and np.all(xi == 0)
    # through the sampling path, packaged as a reference on a uniform grid
    traj = integrate(short_case.problem(), "imex", 51, 5e-3, 100)
    own = Reference(traj.times, traj.x[0], traj.u, traj.flux_left, traj.flux_right, 51, 5e-3,
                    5e-3, 0.0)
    rep = compute_errors(traj, own)
    assert rep.xi_inf == 0
    assert rep.eps_inf < 1e-15 and rep.eps_inf_at_nodes < 1e-15


def test_report_fields_and_profiles(short_case, small_ref):
    traj, rep = run_scheme(short_case, "qunt", 51, 5e-3, small_ref, keep_profiles=True)
    assert rep.times.size == 100 and rep.epsilon.shape == (51,)
    assert rep.eps_inf == pytest.approx(np.max(rep.epsilon))
    assert rep.xi_inf == pytest.approx(max(np.max(rep.xi_left), np.max(rep.xi_right)))
    assert np.all(rep.delta(0.25) >= 0)
    np.testing.assert_allclose(np.sqrt(rep.delta_sq_sum / rep.times.size), rep.epsilon)
    assert 0 < rep.eps_inf < 1e-2
    with pytest.raises(ValueError):
        run_scheme(short_case, "qunt", 201, 5e-3, small_ref)
    with pytest.raises(ValueError):
        run_scheme(short_case, "qunt", 51, 3e-3, small_ref)


def test_convergence_study_records_failures(short_case, small_ref):
    cells = convergence_study(short_case, small_ref, dt_list=[1e-2, 3e-3], nx_list=[10, 20])
    assert len(cells) == 8
    bad = [c for c in cells if c.dt == 3e-3]
    assert all(c.error and np.isnan(c.eps_inf) for c in bad)
    good = [c for c in cells if c.dt == 1e-2]
    assert all(c.error is None and c.eps_inf > 0 for c in good)


def test_trend_diagnostics():
    cells = [ConvergenceCell("qunt", n, 1e-3, e) for n, e in ((20, 1e-2), (40, 4e-3), (60, 5e-3))]
    d = trend_diagnostics(cells)[("qunt", 1e-3)]
    assert d["decreasing"] and d["nx"] == [20, 40, 60]
    cells.append(ConvergenceCell("qunt", 80, 1e-3, 9e-3))
    assert not trend_diagnostics(cells)[("qunt", 1e-3)]["decreasing"]


def test_runtime_comparison_trivial_horizon(short_case):
    rows, gate = runtime_comparison(short_case, configs=(("cn", 41), ("qunt", 21), ("imex", 21)),
                                    horizons={"1 step": 1e-2}, repeats=1)
    assert gate == {}
    assert [r.scheme for r in rows] == ["cn", "qunt", "imex"]
    assert all(np.isfinite(r.ratio) and r.ratio > 0 and r.seconds > 0 for r in rows)
    assert rows[0].ratio == 1.0


def test_csv_writers(tmp_path, short_case):
    cells = [ConvergenceCell("qunt", 10, 1e-2, 0.1 + 1e-17, 2.0, 3.0)]
    write_errors_field_csv(tmp_path / "f.csv", cells)
    write_errors_flux_csv(tmp_path / "q.csv", cells)
    rows = list(csv.reader(open(tmp_path / "f.csv")))
    assert rows[0] == ["scheme", "Nx", "dt", "eps_inf"]
    assert float(rows[1][3]) == 0.1 + 1e-17
    rows = list(csv.reader(open(tmp_path / "q.csv")))
    assert rows[0] == ["scheme", "Nx", "dt", "side", "xi_inf"] and len(rows) == 3
    r, _ = runtime_comparison(short_case, configs=(("imex", 11),), horizons={"h": 0.01}, repeats=1)
    write_runtime_csv(tmp_path / "r.csv", r)
    assert next(csv.reader(open(tmp_path / "r.csv"))) == ["scheme", "Nx", "horizon", "seconds", "ratio"]
    traj = integrate(short_case.problem(), "qunt", 11, 1e-2, 10, save_every=5)
    write_trajectory_csv(tmp_path / "t.csv", traj)
    rows = list(csv.reader(open(tmp_path / "t.csv")))
    assert rows[0][:3] == ["step", "t", "x_0"] and len(rows[0]) == 13
    assert [r[0] for r in rows[1:]] == ["0", "5", "10"]
    np.testing.assert_array_equal(np.array(rows[-1][2:], float), traj.x[-1])


@pytest.mark.slow
def test_reference_spatial_self_convergence():
    # doubling the graded reference mesh must not move the field by more than
    # a small fraction of the tightest error band checked against it
    case = BenchmarkCase()
    x = np.linspace(0.0, 1.0, 401)
    coarse = reference_solution(case, 3001, 1e-3).sample(x)
    fine = reference_solution(case, 6001, 1e-3).sample(x)
    assert np.max(np.abs(coarse - fine)) < 1e-6
