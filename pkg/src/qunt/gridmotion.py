"""Adaptive grid: monitor function, smoothing filter, equidistribution and mesh motion.

The physical mesh ``x_0 < x_1 < ... < x_N`` is the image of the uniform reference
grid ``q_j = j h`` (``h = 1/N``) under a time-dependent map pinned at both ends.
Monitor samples live on intervals (index ``j`` stands for ``j + 1/2``).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numba import njit

from .errors import ConvergenceError, MeshError, SingularSystemError
from .tridiag import thomas

__all__ = [
    "MonitorConfig",
    "MonitorSamples",
    "MovingMesh",
    "advance_mesh",
    "equidistribution_residual",
    "evaluate_monitor",
    "generate_initial_mesh",
    "jacobian",
    "smooth_monitor",
]


@dataclass(frozen=True)
class MovingMesh:
    """Node positions of the moving grid on ``[0, length]``."""

    nodes: np.ndarray
    length: float = 1.0

    def __post_init__(self):
        x = np.array(self.nodes, dtype=float)
        if x.ndim != 1 or x.size < 5:
            raise ValueError("a mesh needs at least 5 nodes (N >= 4 intervals)")
        if not np.all(np.isfinite(x)):
            raise ValueError("mesh nodes must be finite")
        if x[0] != 0.0 or x[-1] != self.length:
            raise ValueError(
                f"boundary nodes must be pinned to 0 and {self.length}, got {x[0]} and {x[-1]}"
            )
        if np.any(np.diff(x) <= 0.0):
            j = int(np.argmin(np.diff(x)))
            raise ValueError(f"mesh nodes must be strictly increasing (interval {j})")
        x.setflags(write=False)
        object.__setattr__(self, "nodes", x)

    @classmethod
    def uniform(cls, n: int, length: float = 1.0) -> "MovingMesh":
        x = length * np.arange(n + 1) / n
        x[-1] = length
        return cls(x, length)

    @property
    def n(self) -> int:
        """Number of intervals."""
        return self.nodes.size - 1

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.nodes[1:] + self.nodes[:-1])


@dataclass(frozen=True)
class MonitorConfig:
    """Monitor weights/exponents, mesh diffusion ``beta_mesh`` and smoothing ``sigma``.

    Defaults are the values tuned for the nonlinear benchmark.
    """

    alpha1: float = 0.9
    beta1: float = 2.0
    alpha2: float = 0.1
    beta2: float = 2.0
    beta_mesh: float = 100.0
    sigma: float = 10.0
    init_tol: float = 1e-10
    init_max_iter: int = 200
    relaxation: float = 0.5

    def __post_init__(self):
        if self.alpha1 < 0 or self.alpha2 < 0:
            raise ValueError("alpha1 and alpha2 must be nonnegative")
        if self.beta1 <= 0 or self.beta2 <= 0:
            raise ValueError("beta1 and beta2 must be positive")
        if self.beta_mesh <= 0:
            raise ValueError("beta_mesh must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.init_tol <= 0 or self.init_max_iter < 1:
            raise ValueError("init_tol must be positive and init_max_iter >= 1")
        if not 0 < self.relaxation <= 1:
            raise ValueError("relaxation must lie in (0, 1]")


@dataclass(frozen=True)
class MonitorSamples:
    """One monitor value per interval."""

    values: np.ndarray

    def __post_init__(self):
        w = np.array(self.values, dtype=float)
        if w.ndim != 1 or w.size < 1:
            raise ValueError("monitor samples must be a nonempty 1D array")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ValueError("monitor samples must be finite and positive")
        w.setflags(write=False)
        object.__setattr__(self, "values", w)


# -- kernels (shared with the compiled time loops) ---------------------------


@njit(cache=True)
def monitor_kernel(u, x, alpha1, beta1, alpha2, beta2, out):
    n = x.shape[0] - 1
    for j in range(n):
        um = 0.5 * (u[j] + u[j + 1])
        grad = (u[j + 1] - u[j]) / (x[j + 1] - x[j])
        out[j] = 1.0 + alpha1 * abs(um) ** beta1 + alpha2 * abs(grad) ** beta2


@njit(cache=True)
def smooth_kernel(w, sigma, out):
    n = w.shape[0]
    if sigma == 0.0 or n < 3:
        out[:] = w
        return True
    lower = np.zeros(n)
    diag = np.ones(n)
    upper = np.zeros(n)
    for j in range(1, n - 1):
        lower[j] = -0.5 * sigma
        diag[j] = 1.0 + sigma
        upper[j] = -0.5 * sigma
    return thomas(lower, diag, upper, w, out)


@njit(cache=True)
def advance_kernel(x, w, dt, beta_mesh, out):
    """Implicit step of ``d/dq(w dx/dq) = beta dx/dt`` with pinned ends."""
    n = x.shape[0] - 1
    mu = dt * n * n / beta_mesh
    lower = np.zeros(n + 1)
    diag = np.ones(n + 1)
    upper = np.zeros(n + 1)
    rhs = x.copy()
    for j in range(1, n):
        lower[j] = -mu * w[j - 1]
        upper[j] = -mu * w[j]
        diag[j] = 1.0 + mu * (w[j - 1] + w[j])
    if not thomas(lower, diag, upper, rhs, out):
        return False
    out[0] = x[0]
    out[n] = x[n]
    return True


@njit(cache=True)
def equidistribute_kernel(w, length, out):
    """Exact solution of ``w_{j+1/2} dx_{j+1/2} = const`` with pinned ends."""
    n = w.shape[0]
    total = 0.0
    for j in range(n):
        total += 1.0 / w[j]
    out[0] = 0.0
    acc = 0.0
    for j in range(n - 1):
        acc += 1.0 / w[j]
        out[j + 1] = length * acc / total
    out[n] = length


# -- public operations -------------------------------------------------------


def evaluate_monitor(field, mesh: MovingMesh, cfg: MonitorConfig) -> MonitorSamples:
    """Monitor ``1 + a1 |u|^b1 + a2 |u_x|^b2`` sampled on every interval.

    The amplitude term uses the interval mean of the two nodal values.
    """
    u = np.asarray(field, dtype=float)
    if u.shape != mesh.nodes.shape:
        raise ValueError(f"field has {u.size} values, mesh has {mesh.nodes.size} nodes")
    if not np.all(np.isfinite(u)):
        raise ValueError("field contains non-finite values")
    out = np.empty(mesh.n)
    monitor_kernel(u, mesh.nodes, cfg.alpha1, cfg.beta1, cfg.alpha2, cfg.beta2, out)
    return MonitorSamples(out)


def smooth_monitor(w: MonitorSamples, sigma: float) -> MonitorSamples:
    """Implicit smoothing filter; end samples are copied unchanged."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    out = np.empty_like(w.values)
    if not smooth_kernel(np.ascontiguousarray(w.values), float(sigma), out):
        raise SingularSystemError("smoothing system is singular")
    return MonitorSamples(out)


def equidistribution_residual(mesh: MovingMesh, w: MonitorSamples) -> float:
    """Max over interior nodes of ``|w_{j+1/2} dx_{j+1/2} - w_{j-1/2} dx_{j-1/2}|``."""
    flux = w.values * mesh.widths
    return float(np.max(np.abs(np.diff(flux)))) if flux.size > 1 else 0.0


def generate_initial_mesh(
    initial_field: Callable,
    n: int,
    cfg: MonitorConfig,
    length: float = 1.0,
    monitor: Callable | None = None,
) -> MovingMesh:
    """Equidistributed mesh for a given initial field.

    Damped fixed-point sweeps starting from the uniform grid: the (smoothed)
    monitor is re-evaluated on the current mesh, the equidistributed mesh for
    those weights is computed, and the nodes move part of the way towards it.

    Parameters
    ----------
    initial_field : callable
        Vectorised ``u(x)`` on ``[0, length]``.
    n : int
        Number of intervals (``n + 1`` nodes), at least 4.
    monitor : callable, optional
        ``monitor(u, mesh) -> MonitorSamples`` replacing :func:`evaluate_monitor`.

    Raises
    ------
    ConvergenceError
        If the residual is still above ``cfg.init_tol * length`` after
        ``cfg.init_max_iter`` sweeps.
    """
    if n < 4:
        raise ValueError("need at least 4 intervals")
    tol = cfg.init_tol * length
    mesh = MovingMesh.uniform(n, length)
    target = np.empty(n + 1)
    residual = np.inf
    for _ in range(cfg.init_max_iter + 1):
        u = np.asarray(initial_field(mesh.nodes), dtype=float) * np.ones(n + 1)
        w = monitor(u, mesh) if monitor is not None else evaluate_monitor(u, mesh, cfg)
        w = smooth_monitor(w, cfg.sigma)
        residual = equidistribution_residual(mesh, w)
        if residual <= tol:
            return mesh
        equidistribute_kernel(np.ascontiguousarray(w.values), float(length), target)
        x = (1.0 - cfg.relaxation) * mesh.nodes + cfg.relaxation * target
        x[0], x[-1] = 0.0, length
        if np.any(np.diff(x) <= 0):
            raise MeshError("node ordering lost during initial grid generation")
        mesh = MovingMesh(x, length)
    raise ConvergenceError(
        f"initial grid did not equidistribute within {cfg.init_max_iter} sweeps "
        f"(residual {residual:.3e} > {tol:.3e})"
    )


def advance_mesh(
    mesh: MovingMesh, w_smoothed: MonitorSamples, dt: float, beta_mesh: float
) -> MovingMesh:
    """One implicit step of the parabolic mesh-motion equation."""
    if dt <= 0 or beta_mesh <= 0:
        raise ValueError("dt and beta_mesh must be positive")
    if w_smoothed.values.size != mesh.n:
        raise ValueError("monitor must have one sample per interval")
    out = np.empty(mesh.n + 1)
    ok = advance_kernel(
        np.ascontiguousarray(mesh.nodes), np.ascontiguousarray(w_smoothed.values),
        float(dt), float(beta_mesh), out,
    )
    if not ok:
        raise SingularSystemError("mesh-motion system is singular")
    if np.any(np.diff(out) <= 0):
        raise MeshError("mesh nodes crossed; increase beta_mesh or reduce dt")
    return MovingMesh(out, mesh.length)


def jacobian(mesh: MovingMesh) -> tuple[np.ndarray, np.ndarray]:
    """Interval and nodal Jacobians ``dx/dq`` of the reference-to-physical map.

    Nodal values use centred differences inside and one-sided differences at
    the two boundary nodes.
    """
    x = mesh.nodes
    n = mesh.n
    j_half = np.diff(x) * n
    j_node = np.empty(n + 1)
    j_node[1:-1] = (x[2:] - x[:-2]) * (0.5 * n)
    j_node[0] = j_half[0]
    j_node[-1] = j_half[-1]
    return j_half, j_node
