from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qunt.errors import ConvergenceError
from qunt.gridmotion import (
    MonitorConfig,
    MonitorSamples,
    MovingMesh,
    advance_mesh,
    equidistribution_residual,
    evaluate_monitor,
    generate_initial_mesh,
    jacobian,
    smooth_monitor,
)


def test_mesh_validation():
    with pytest.raises(ValueError):
        MovingMesh([0.0, 0.2, 0.1, 0.5, 1.0])
    with pytest.raises(ValueError):
        MovingMesh([0.0, 0.2, 0.4, 0.6, 0.9])
    with pytest.raises(ValueError):
        MovingMesh([0.0, 0.5, 1.0])
    m = MovingMesh.uniform(4)
    assert m.n == 4 and m.h == 0.25
    np.testing.assert_allclose(m.widths, 0.25)
    with pytest.raises(ValueError):
        m.nodes[1] = 0.3


def test_monitor_hand_values():
    mesh = MovingMesh([0.0, 0.25, 0.5, 0.75, 1.0])
    u = np.array([1.0, 1.0, 2.0, 2.0, 0.0])
    cfg = MonitorConfig(alpha1=0.5, beta1=2.0, alpha2=0.25, beta2=1.0, sigma=0.0)
    w = evaluate_monitor(u, mesh, cfg).values
    # 1 + 0.5 * mean^2 + 0.25 * |slope|
    expected = [1 + 0.5 * 1.0, 1 + 0.5 * 2.25 + 0.25 * 4, 1 + 0.5 * 4.0, 1 + 0.5 * 1.0 + 0.25 * 8]
    np.testing.assert_allclose(w, expected, rtol=1e-15)


def test_smoothing_matches_dense_solve():
    rng = np.random.default_rng(3)
    w = rng.uniform(1.0, 5.0, 12)
    sigma = 4.0
    n = w.size
    A = np.eye(n)
    for j in range(1, n - 1):
        A[j, j - 1 : j + 2] = [-sigma / 2, 1 + sigma, -sigma / 2]
    np.testing.assert_allclose(smooth_monitor(MonitorSamples(w), sigma).values,
                               np.linalg.solve(A, w), rtol=1e-12)
    np.testing.assert_array_equal(smooth_monitor(MonitorSamples(w), 0.0).values, w)


def test_advance_matches_dense_backward_euler():
    rng = np.random.default_rng(4)
    mesh = MovingMesh(np.sort(np.concatenate([[0.0, 1.0], rng.uniform(0.05, 0.95, 9)])))
    w = rng.uniform(1.0, 3.0, mesh.n)
    dt, beta = 0.01, 5.0
    n = mesh.n
    mu = dt * n * n / beta
    A = np.eye(n + 1)
    for j in range(1, n):
        A[j, j - 1 : j + 2] = [-mu * w[j - 1], 1 + mu * (w[j - 1] + w[j]), -mu * w[j]]
    expected = np.linalg.solve(A, mesh.nodes)
    got = advance_mesh(mesh, MonitorSamples(w), dt, beta).nodes
    np.testing.assert_allclose(got, expected, atol=1e-14)
    assert got[0] == 0.0 and got[-1] == 1.0


def test_uniform_monitor_keeps_uniform_mesh():
    mesh = MovingMesh.uniform(20)
    out = advance_mesh(mesh, MonitorSamples(np.full(20, 7.0)), 0.1, 1.0)
    np.testing.assert_allclose(out.nodes, mesh.nodes, atol=1e-15)


def test_jacobian_definition():
    x = np.array([0.0, 0.1, 0.3, 0.6, 1.0])
    j_half, j_node = jacobian(MovingMesh(x))
    np.testing.assert_allclose(j_half, np.diff(x) * 4)
    np.testing.assert_allclose(j_node, [0.4, 0.6, 1.0, 1.4, 1.6])
    # mean of the interval Jacobian is the domain length
    assert np.mean(j_half) == pytest.approx(1.0)


def test_initial_mesh_concentrates_on_steep_front():
    cfg = MonitorConfig(alpha1=0.0, alpha2=1.0, beta2=2.0, sigma=0.0)
    mesh = generate_initial_mesh(lambda x: np.tanh(10 * (x - 0.5)), 40, cfg)
    w = evaluate_monitor(np.tanh(10 * (mesh.nodes - 0.5)), mesh, cfg)
    assert equidistribution_residual(mesh, w) <= cfg.init_tol
    widths = mesh.widths
    assert widths[19] < 0.5 * widths[0]


def test_initial_mesh_reports_nonconvergence():
    cfg = MonitorConfig(alpha2=1.0, beta2=2.0, sigma=0.0, init_max_iter=1, init_tol=1e-14)
    with pytest.raises(ConvergenceError):
        generate_initial_mesh(lambda x: np.tanh(40 * (x - 0.5)), 40, cfg)


def test_custom_monitor_is_used():
    # monitor larger on the left half: intervals there shrink
    def mon(u, mesh):
        return MonitorSamples(np.where(mesh.midpoints < 0.5, 4.0, 1.0))

    mesh = generate_initial_mesh(lambda x: 0 * x, 16, MonitorConfig(sigma=0.0), monitor=mon)
    assert mesh.widths[0] < mesh.widths[-1]


@given(seed=st.integers(0, 2**31 - 1), n=st.integers(4, 64), beta=st.floats(0.1, 100.0),
       dt=st.floats(1e-4, 1.0))
def test_advance_preserves_ordering_and_ends(seed, n, beta, dt):
    rng = np.random.default_rng(seed)
    x = np.concatenate([[0.0], np.sort(rng.uniform(0, 1, n - 1)), [1.0]])
    if np.any(np.diff(x) <= 1e-9):
        return
    w = np.exp(rng.normal(0, 2, n))
    out = advance_mesh(MovingMesh(x), MonitorSamples(w), dt, beta).nodes
    assert out[0] == 0.0 and out[-1] == 1.0
    assert np.all(np.diff(out) > 0)
    assert abs(np.sum(np.diff(out)) - 1.0) < 1e-12


@given(seed=st.integers(0, 2**31 - 1), n=st.integers(4, 64))
def test_equidistribution_residual_vanishes_for_exact_mesh(seed, n):
    rng = np.random.default_rng(seed)
    w = rng.uniform(0.5, 5.0, n)
    widths = (1 / w) / np.sum(1 / w)
    mesh = MovingMesh(np.concatenate([[0.0], np.cumsum(widths)[:-1], [1.0]]))
    assert equidistribution_residual(mesh, MonitorSamples(w)) < 1e-13
