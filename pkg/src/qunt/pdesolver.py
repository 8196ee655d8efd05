"""Nonlinear 1D heat conduction: scaling, boundary conditions and three time steppers.

All solvers work on the dimensionless problem

    c*(u, x) du/dt = Fo d/dx (k*(u, x) du/dx),   x in [0, 1],

with Dirichlet, Robin or Robin-plus-radiation conditions at either end. The
boundary conditions are written with the outward normal ``n``:

    -k* du/dn = Bi (u - u_amb) - absorbed_flux + R_lw (u^4 - u_sky^4).

Steppers
--------
``step_imex_uniform``
    Diffusion implicit, coefficients frozen at the old level, fixed uniform mesh.
``step_qunt``
    The same scheme written on the moving mesh, including the mesh-speed term.
``step_crank_nicolson``
    Second-order reference stepper; coefficients resolved by fixed-point sweeps.

The per-step arithmetic lives in compiled kernels shared by the step functions
and by :func:`integrate`, which runs a whole simulation inside one compiled loop.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np
from numba import njit

from .errors import ConvergenceError, MeshError, NumericalError, SingularSystemError
from .gridmotion import (
    MonitorConfig,
    MovingMesh,
    advance_kernel,
    advance_mesh,
    evaluate_monitor,
    generate_initial_mesh,
    monitor_kernel,
    smooth_kernel,
    smooth_monitor,
)
from .tridiag import thomas

STEFAN_BOLTZMANN = 5.670374419e-8

DIRICHLET, ROBIN, ROBIN_RADIATIVE = 0, 1, 2
_KINDS = {"dirichlet": DIRICHLET, "robin": ROBIN, "robin_radiative": ROBIN_RADIATIVE}

SCHEMES = ("imex", "qunt", "cn")
_SCHEME_CODE = {"imex": 0, "qunt": 1, "cn": 2}

# status codes returned by compiled kernels
_OK, _SINGULAR, _CROSSED, _NO_FP = 0, 1, 2, 3


# ---------------------------------------------------------------------------
# Data types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReferenceScales:
    """Reference values used to make the problem dimensionless."""

    T0: float = 293.15
    t0: float = 3600.0
    l: float = 1.0
    k0: float = 1.0
    c0: float = 1.0

    def __post_init__(self):
        for name in ("T0", "t0", "l", "k0", "c0"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise ValueError(f"reference scale {name} must be positive, got {v}")

    @property
    def fourier(self) -> float:
        return self.t0 * self.k0 / (self.l**2 * self.c0)

    @classmethod
    def for_layers(cls, layers, T0: float = 293.15, t0: float = 3600.0) -> "ReferenceScales":
        """Scales with ``k0``/``c0`` from the first layer and ``l`` the total thickness."""
        first = layers[0]
        return cls(T0=T0, t0=t0, l=float(sum(layer.thickness for layer in layers)),
                   k0=first.k, c0=first.c)


@dataclass(frozen=True)
class PropertyLaw:
    """Dimensionless coefficient ``p0 + p1 u + p2 exp(-p3 (u - p4)^2)`` per layer.

    Layer ``m`` occupies ``bounds[m] <= x < bounds[m + 1]`` with ``bounds``
    running from 0 to 1. The family covers the temperature-dependent benchmark
    material as well as constant building materials, and compiles to machine code.
    """

    coefficients: np.ndarray
    bounds: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0]))

    def __post_init__(self):
        coef = np.atleast_2d(np.array(self.coefficients, dtype=float))
        bounds = np.array(self.bounds, dtype=float)
        if coef.shape[1] != 5:
            raise ValueError("each layer needs 5 coefficients (p0, p1, p2, p3, p4)")
        if bounds.shape != (coef.shape[0] + 1,):
            raise ValueError("bounds must have one more entry than there are layers")
        if bounds[0] != 0.0 or bounds[-1] != 1.0 or np.any(np.diff(bounds) <= 0):
            raise ValueError("bounds must increase strictly from 0 to 1")
        coef.setflags(write=False)
        bounds.setflags(write=False)
        object.__setattr__(self, "coefficients", coef)
        object.__setattr__(self, "bounds", bounds)

    @classmethod
    def constant(cls, value: float) -> "PropertyLaw":
        return cls([[value, 0.0, 0.0, 0.0, 0.0]])

    @classmethod
    def layered(cls, values, bounds) -> "PropertyLaw":
        return cls([[v, 0.0, 0.0, 0.0, 0.0] for v in values], bounds)

    @property
    def n_layers(self) -> int:
        return self.coefficients.shape[0]

    @property
    def depends_on_u(self) -> bool:
        c = self.coefficients
        return bool(np.any(c[:, 1] != 0) or np.any(c[:, 2] != 0))

    def layer_of(self, x):
        idx = np.searchsorted(self.bounds, np.asarray(x, dtype=float), side="right") - 1
        return np.clip(idx, 0, self.n_layers - 1)

    def __call__(self, u, x):
        u = np.asarray(u, dtype=float)
        p = self.coefficients[self.layer_of(np.broadcast_to(x, u.shape))]
        return p[..., 0] + p[..., 1] * u + p[..., 2] * np.exp(-p[..., 3] * (u - p[..., 4]) ** 2)


def _as_signal(value) -> Callable:
    if callable(value):
        return value
    v = float(value)
    return lambda t: np.full(np.shape(t), v) if np.ndim(t) else v


@dataclass(frozen=True)
class BoundarySpec:
    """Boundary condition at one end of the dimensionless domain.

    ``ambient``, ``absorbed_flux`` and ``sky`` are functions of dimensionless
    time (constants are accepted and wrapped); they must accept numpy arrays.
    """

    kind: Literal["dirichlet", "robin", "robin_radiative"]
    ambient: Callable | float
    biot: float = 0.0
    absorbed_flux: Callable | float = 0.0
    rlw: float = 0.0
    sky: Callable | float = 0.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown boundary kind {self.kind!r}")
        if self.biot < 0 or self.rlw < 0:
            raise ValueError("biot and rlw must be nonnegative")
        if self.kind == "robin" and self.rlw != 0:
            raise ValueError("long-wave exchange needs kind='robin_radiative'")
        for name in ("ambient", "absorbed_flux", "sky"):
            object.__setattr__(self, name, _as_signal(getattr(self, name)))

    @classmethod
    def dirichlet(cls, ambient) -> "BoundarySpec":
        return cls("dirichlet", ambient)

    def rows(self, times) -> np.ndarray:
        """Kernel encoding ``[kind, ambient, biot, flux, rlw, sky]`` at each time."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        out = np.empty((times.size, 6))
        out[:, 0] = _KINDS[self.kind]
        out[:, 1] = np.broadcast_to(self.ambient(times), times.shape)
        out[:, 2] = self.biot
        if self.kind == "dirichlet":
            out[:, 3] = 0.0
            out[:, 4] = 0.0
            out[:, 5] = 0.0
        else:
            out[:, 3] = np.broadcast_to(self.absorbed_flux(times), times.shape)
            out[:, 4] = self.rlw
            out[:, 5] = np.broadcast_to(self.sky(times), times.shape) if self.rlw else 0.0
        return out


@dataclass(frozen=True)
class DimensionlessProblem:
    """Coefficient laws, Fourier number, boundary conditions and initial field."""

    cstar: PropertyLaw
    kstar: PropertyLaw
    fo: float
    left_bc: BoundarySpec
    right_bc: BoundarySpec
    initial: Callable
    u_range: tuple[float, float] = (0.5, 1.5)

    def __post_init__(self):
        if not isinstance(self.cstar, PropertyLaw) or not isinstance(self.kstar, PropertyLaw):
            raise TypeError("cstar and kstar must be PropertyLaw instances")
        if not np.array_equal(self.cstar.bounds, self.kstar.bounds):
            raise ValueError("cstar and kstar must share layer bounds")
        if not np.isfinite(self.fo) or self.fo <= 0:
            raise ValueError("Fourier number must be positive")
        u = np.linspace(self.u_range[0], self.u_range[1], 201)
        b = self.kstar.bounds
        for xm in 0.5 * (b[1:] + b[:-1]):
            for name, law in (("cstar", self.cstar), ("kstar", self.kstar)):
                vals = law(u, np.full_like(u, xm))
                if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
                    raise ValueError(f"{name} is not positive over u in {self.u_range}")

    @property
    def is_linear(self) -> bool:
        """True when coefficients do not depend on u and no radiation is present."""
        radiative = any(bc.kind == "robin_radiative" and bc.rlw > 0
                        for bc in (self.left_bc, self.right_bc))
        return not (self.cstar.depends_on_u or self.kstar.depends_on_u or radiative)


@dataclass(frozen=True)
class FieldState:
    """Temperature field on its mesh at dimensionless time ``t``."""

    u: np.ndarray
    mesh: MovingMesh
    t: float = 0.0

    def __post_init__(self):
        u = np.array(self.u, dtype=float)
        if u.shape != self.mesh.nodes.shape:
            raise ValueError("field and mesh sizes differ")
        if not np.all(np.isfinite(u)):
            raise NumericalError(f"non-finite temperature at t={self.t}")
        u.setflags(write=False)
        object.__setattr__(self, "u", u)


# -- physical problem description and scaling --------------------------------


@dataclass(frozen=True)
class PhysicalLayer:
    thickness: float  # m
    k: float  # W/(m K)
    c: float  # J/(m^3 K)

    def __post_init__(self):
        if self.thickness <= 0 or self.k <= 0 or self.c <= 0:
            raise ValueError("layer thickness, k and c must be positive")


@dataclass(frozen=True)
class PhysicalBoundary:
    """Boundary condition in SI units; signals are functions of time in seconds."""

    kind: Literal["dirichlet", "robin", "robin_radiative"]
    ambient: Callable | float  # K
    h: float = 0.0  # W/(m^2 K)
    absorbed_flux: Callable | float = 0.0  # alpha * q_solar, W/m^2
    emissivity: float = 0.0
    sky: Callable | float = 0.0  # K


@dataclass(frozen=True)
class PhysicalProblem:
    layers: tuple
    left: PhysicalBoundary
    right: PhysicalBoundary
    initial: Callable  # x [m] -> T [K]


def nondimensionalize(physical: PhysicalProblem, scales: ReferenceScales) -> DimensionlessProblem:
    """Map a layered SI problem onto the unit interval.

    ``u = T/T0``, ``x* = x/l``, ``t* = t/t0``, ``Bi = h l/k0``, ``q* = l q/(T0 k0)``,
    ``R_lw = eps sigma l T0^3/k0`` and ``Fo = t0 k0/(l^2 c0)``.
    """
    layers = tuple(physical.layers)
    if not layers:
        raise ValueError("at least one layer is required")
    total = float(sum(layer.thickness for layer in layers))
    if abs(total - scales.l) > 1e-12 * total:
        raise ValueError(f"length scale {scales.l} differs from total thickness {total}")
    edges = np.concatenate([[0.0], np.cumsum([layer.thickness for layer in layers])]) / total
    edges[-1] = 1.0
    kstar = PropertyLaw.layered([layer.k / scales.k0 for layer in layers], edges)
    cstar = PropertyLaw.layered([layer.c / scales.c0 for layer in layers], edges)

    def boundary(b: PhysicalBoundary) -> BoundarySpec:
        amb, flux, sky = (_as_signal(s) for s in (b.ambient, b.absorbed_flux, b.sky))
        ambient = lambda ts: np.asarray(amb(np.asarray(ts) * scales.t0)) / scales.T0
        if b.kind == "dirichlet":
            return BoundarySpec("dirichlet", ambient)
        if b.h < 0 or b.emissivity < 0:
            raise ValueError("h and emissivity must be nonnegative")
        qscale = scales.l / (scales.T0 * scales.k0)
        return BoundarySpec(
            b.kind,
            ambient,
            biot=b.h * scales.l / scales.k0,
            absorbed_flux=lambda ts: np.asarray(flux(np.asarray(ts) * scales.t0)) * qscale,
            rlw=(b.emissivity * STEFAN_BOLTZMANN * scales.l * scales.T0**3 / scales.k0
                 if b.kind == "robin_radiative" else 0.0),
            sky=lambda ts: np.asarray(sky(np.asarray(ts) * scales.t0)) / scales.T0,
        )

    init = physical.initial
    return DimensionlessProblem(
        cstar=cstar,
        kstar=kstar,
        fo=scales.fourier,
        left_bc=boundary(physical.left),
        right_bc=boundary(physical.right),
        initial=lambda xs: np.asarray(init(np.asarray(xs) * scales.l), dtype=float) / scales.T0,
        u_range=(0.5, 1.5),
    )


def redimensionalize_flux(q_star, scales: ReferenceScales):
    """Dimensionless flux to W/m^2."""
    return np.asarray(q_star) * scales.T0 * scales.k0 / scales.l


def redimensionalize_temperature(u, scales: ReferenceScales):
    """Dimensionless temperature to kelvin."""
    return np.asarray(u) * scales.T0


# ---------------------------------------------------------------------------
# Compiled kernels
# ---------------------------------------------------------------------------


@njit(cache=True)
def _law(coef, m, u):
    v = coef[m, 0] + coef[m, 1] * u
    if coef[m, 2] != 0.0:
        d = u - coef[m, 4]
        v += coef[m, 2] * np.exp(-coef[m, 3] * d * d)
    return v


@njit(cache=True)
def _layer(bounds, x):
    nl = bounds.shape[0] - 1
    m = 0
    while m < nl - 1 and x >= bounds[m + 1]:
        m += 1
    return m


@njit(cache=True)
def _coefficients(u, x, kc, cc, bounds, k_half, c_node):
    """Interval conductivities and nodal storage coefficients.

    Inside one material ``k_{j+1/2}`` is the mean of the two nodal values; an
    interval cut by interfaces gets the thickness-weighted harmonic mean of its
    pieces. ``c_j`` is averaged over the node's control volume.
    """
    n = x.shape[0] - 1
    nl = bounds.shape[0] - 1
    if nl == 1:
        k_prev = _law(kc, 0, u[0])
        for j in range(n):
            k_next = _law(kc, 0, u[j + 1])
            k_half[j] = 0.5 * (k_prev + k_next)
            k_prev = k_next
        for j in range(n + 1):
            c_node[j] = _law(cc, 0, u[j])
        return
    for j in range(n):
        xa = x[j]
        xb = x[j + 1]
        ma = _layer(bounds, xa)
        mb = _layer(bounds, xb)
        if mb > ma and xb == bounds[mb]:
            mb -= 1
        if ma == mb:
            k_half[j] = 0.5 * (_law(kc, ma, u[j]) + _law(kc, ma, u[j + 1]))
        else:
            res = 0.0
            for m in range(ma, mb + 1):
                lo = max(xa, bounds[m])
                hi = min(xb, bounds[m + 1])
                km = 0.5 * (_law(kc, m, u[j]) + _law(kc, m, u[j + 1]))
                res += (hi - lo) / km
            k_half[j] = (xb - xa) / res
    for j in range(n + 1):
        lo_cv = x[0] if j == 0 else 0.5 * (x[j - 1] + x[j])
        hi_cv = x[n] if j == n else 0.5 * (x[j] + x[j + 1])
        ma = _layer(bounds, lo_cv)
        mb = _layer(bounds, hi_cv)
        if mb > ma and hi_cv == bounds[mb]:
            mb -= 1
        if ma == mb:
            c_node[j] = _law(cc, ma, u[j])
        else:
            acc = 0.0
            for m in range(ma, mb + 1):
                lo = max(lo_cv, bounds[m])
                hi = min(hi_cv, bounds[m + 1])
                acc += (hi - lo) * _law(cc, m, u[j])
            c_node[j] = acc / (hi_cv - lo_cv)


@njit(cache=True)
def _edge_weights(x, bounds, right):
    """Derivative weights at an end node, ordered from the boundary inwards.

    Three-point second-order weights; two-point if the stencil crosses a
    material interface.
    """
    n = x.shape[0] - 1
    if right:
        x0, x1, x2 = x[n], x[n - 1], x[n - 2]
        three = x2 >= bounds[bounds.shape[0] - 2]
    else:
        x0, x1, x2 = x[0], x[1], x[2]
        three = x2 <= bounds[1]
    if not three:
        g = 1.0 / (x0 - x1)
        return g, -g, 0.0
    w0 = (2.0 * x0 - x1 - x2) / ((x0 - x1) * (x0 - x2))
    w1 = (x0 - x2) / ((x1 - x0) * (x1 - x2))
    w2 = (x0 - x1) / ((x2 - x0) * (x2 - x1))
    return w0, w1, w2


@njit(cache=True)
def _edge_k(u, kc, bounds, right):
    if right:
        return _law(kc, bounds.shape[0] - 2, u[u.shape[0] - 1])
    return _law(kc, 0, u[0])


@njit(cache=True)
def _flux(u, x, kc, bounds, right):
    """``-k du/dx`` at an end node (sign as in the flux definition, +x positive)."""
    n = x.shape[0] - 1
    w0, w1, w2 = _edge_weights(x, bounds, right)
    if right:
        dudx = w0 * u[n] + w1 * u[n - 1] + w2 * u[n - 2]
    else:
        dudx = w0 * u[0] + w1 * u[1] + w2 * u[2]
    return -_edge_k(u, kc, bounds, right) * dudx


@njit(cache=True)
def _boundary_rows(lower, diag, upper, rhs, x, bc_l, bc_r, k_l, k_r, urad_l, urad_r, bounds):
    """Write rows 0 and N; a third stencil entry is eliminated with the adjacent row."""
    n = x.shape[0] - 1
    # left end, outward normal -x:  k u_x = Bi (u - amb) - F + R (u^4 - sky^4)
    if bc_l[0] == DIRICHLET:
        diag[0] = 1.0
        upper[0] = 0.0
        rhs[0] = bc_l[1]
    else:
        w0, w1, w2 = _edge_weights(x, bounds, False)
        b0 = bc_l[2] - k_l * w0
        c0 = -k_l * w1
        e0 = -k_l * w2
        r0 = bc_l[2] * bc_l[1] + bc_l[3] - bc_l[4] * (urad_l**4 - bc_l[5] ** 4)
        if e0 != 0.0:
            f = e0 / upper[1]
            b0 -= f * lower[1]
            c0 -= f * diag[1]
            r0 -= f * rhs[1]
        diag[0] = b0
        upper[0] = c0
        rhs[0] = r0
    lower[0] = 0.0
    # right end, outward normal +x:  -k u_x = Bi (u - amb) - F + R (u^4 - sky^4)
    if bc_r[0] == DIRICHLET:
        diag[n] = 1.0
        lower[n] = 0.0
        rhs[n] = bc_r[1]
    else:
        w0, w1, w2 = _edge_weights(x, bounds, True)
        b = bc_r[2] + k_r * w0
        a = k_r * w1
        e = k_r * w2
        r = bc_r[2] * bc_r[1] + bc_r[3] - bc_r[4] * (urad_r**4 - bc_r[5] ** 4)
        if e != 0.0:
            f = e / lower[n - 1]
            a -= f * diag[n - 1]
            b -= f * upper[n - 1]
            r -= f * rhs[n - 1]
        diag[n] = b
        lower[n] = a
        rhs[n] = r
    upper[n] = 0.0


@njit(cache=True)
def _interior_dominant(lower, diag, upper):
    for j in range(1, diag.shape[0] - 1):
        if diag[j] < abs(lower[j]) + abs(upper[j]) - 1e-12 * diag[j]:
            return False
    return True


@njit(cache=True)
def imex_kernel(u, x, dt, fo, kc, cc, bounds, bc_l, bc_r, out):
    n = x.shape[0] - 1
    k_half = np.empty(n)
    c_node = np.empty(n + 1)
    _coefficients(u, x, kc, cc, bounds, k_half, c_node)
    lower = np.zeros(n + 1)
    diag = np.zeros(n + 1)
    upper = np.zeros(n + 1)
    rhs = np.zeros(n + 1)
    for j in range(1, n):
        dxm = x[j] - x[j - 1]
        dxp = x[j + 1] - x[j]
        cv = 0.5 * (dxm + dxp)
        am = fo * k_half[j - 1] / (dxm * cv)
        ap = fo * k_half[j] / (dxp * cv)
        d = c_node[j] / dt
        lower[j] = -am
        diag[j] = d + am + ap
        upper[j] = -ap
        rhs[j] = d * u[j]
    _boundary_rows(lower, diag, upper, rhs, x, bc_l, bc_r,
                   _edge_k(u, kc, bounds, False), _edge_k(u, kc, bounds, True),
                   u[0], u[n], bounds)
    if not _interior_dominant(lower, diag, upper):
        return _SINGULAR
    return _OK if thomas(lower, diag, upper, rhs, out) else _SINGULAR


@njit(cache=True)
def qunt_kernel(u, x_old, x_new, dt, fo, kc, cc, bounds, bc_l, bc_r, jac_new, out):
    """Field step on the moving mesh (coefficients and Jacobians at the old level)."""
    n = x_old.shape[0] - 1
    h = 1.0 / n
    k_half = np.empty(n)
    c_node = np.empty(n + 1)
    _coefficients(u, x_old, kc, cc, bounds, k_half, c_node)
    xj = x_new if jac_new else x_old
    lower = np.zeros(n + 1)
    diag = np.zeros(n + 1)
    upper = np.zeros(n + 1)
    rhs = np.zeros(n + 1)
    for j in range(1, n):
        jm = (xj[j] - xj[j - 1]) / h
        jp = (xj[j + 1] - xj[j]) / h
        jn = (xj[j + 1] - xj[j - 1]) / (2.0 * h)
        am = fo * k_half[j - 1] / (jm * h * h)
        ap = fo * k_half[j] / (jp * h * h)
        d = jn * c_node[j] / dt
        m = c_node[j] * (x_new[j] - x_old[j]) / (dt * 2.0 * h)
        if not (d > 0.0 and am > 0.0 and ap > 0.0):
            return _SINGULAR
        # the mesh-speed term may break diagonal dominance; only pivots are checked
        lower[j] = -am + m
        diag[j] = d + am + ap
        upper[j] = -ap - m
        rhs[j] = d * u[j]
    _boundary_rows(lower, diag, upper, rhs, x_new, bc_l, bc_r,
                   _edge_k(u, kc, bounds, False), _edge_k(u, kc, bounds, True),
                   u[0], u[n], bounds)
    return _OK if thomas(lower, diag, upper, rhs, out) else _SINGULAR


@njit(cache=True)
def cn_kernel(u, x, dt, fo, kc, cc, bounds, bc_l, bc_r, linear, fp_tol, fp_max_iter, out,
              guess):
    """Crank-Nicolson step; returns (status, number of linear solves).

    ``guess`` seeds the fixed-point iteration (the old field when nothing better
    is known).
    """
    n = x.shape[0] - 1
    k_old = np.empty(n)
    c_old = np.empty(n + 1)
    _coefficients(u, x, kc, cc, bounds, k_old, c_old)
    expl = np.zeros(n + 1)
    for j in range(1, n):
        dxm = x[j] - x[j - 1]
        dxp = x[j + 1] - x[j]
        cv = 0.5 * (dxm + dxp)
        expl[j] = fo / cv * (k_old[j] * (u[j + 1] - u[j]) / dxp
                             - k_old[j - 1] * (u[j] - u[j - 1]) / dxm)
    it = guess.copy()
    new = np.empty(n + 1)
    k_it = np.empty(n)
    c_it = np.empty(n + 1)
    lower = np.zeros(n + 1)
    diag = np.zeros(n + 1)
    upper = np.zeros(n + 1)
    rhs = np.zeros(n + 1)
    for sweep in range(fp_max_iter):
        if linear:
            k_it[:] = k_old
            c_it[:] = c_old
        else:
            _coefficients(it, x, kc, cc, bounds, k_it, c_it)
        for j in range(1, n):
            dxm = x[j] - x[j - 1]
            dxp = x[j + 1] - x[j]
            cv = 0.5 * (dxm + dxp)
            am = 0.5 * fo * k_it[j - 1] / (dxm * cv)
            ap = 0.5 * fo * k_it[j] / (dxp * cv)
            d = 0.5 * (c_old[j] + c_it[j]) / dt
            lower[j] = -am
            diag[j] = d + am + ap
            upper[j] = -ap
            rhs[j] = d * u[j] + 0.5 * expl[j]
        _boundary_rows(lower, diag, upper, rhs, x, bc_l, bc_r,
                       _edge_k(it, kc, bounds, False), _edge_k(it, kc, bounds, True),
                       it[0], it[n], bounds)
        if not _interior_dominant(lower, diag, upper):
            return _SINGULAR, sweep + 1
        if not thomas(lower, diag, upper, rhs, new):
            return _SINGULAR, sweep + 1
        if linear:
            out[:] = new
            return _OK, 1
        change = 0.0
        for j in range(n + 1):
            change = max(change, abs(new[j] - it[j]))
        it[:] = new
        if change <= fp_tol:
            out[:] = new
            return _OK, sweep + 1
    out[:] = it
    return _NO_FP, fp_max_iter


@njit(cache=True)
def march_kernel(scheme, u0, x0, dt, nsteps, stride, fo, kc, cc, bounds, sig_l, sig_r,
                 mon, jac_new, linear, fp_tol, fp_max_iter):
    """Run ``nsteps`` steps; keep every ``stride``-th state and the end fluxes at every step.

    ``mon`` = (alpha1, beta1, alpha2, beta2, beta_mesh, sigma).
    Returns saved fields, saved meshes, left/right fluxes, diagnostics, status,
    the failing step (or -1) and the last field and mesh.
    diagnostics = [min interval width, max |sum(widths) - l|, max solves per
    step, count of steps where a node moved further than its local interval].
    """
    n = x0.shape[0] - 1
    nsave = nsteps // stride + 1
    U = np.empty((nsave, n + 1))
    X = np.empty((nsave, n + 1))
    q_l = np.full(nsteps + 1, np.nan)
    q_r = np.full(nsteps + 1, np.nan)
    diag_out = np.zeros(4)
    u = u0.copy()
    x = x0.copy()
    length = x0[n]
    U[0] = u
    X[0] = x
    q_l[0] = _flux(u, x, kc, bounds, False)
    q_r[0] = _flux(u, x, kc, bounds, True)
    diag_out[0] = np.min(x[1:] - x[:-1])
    w = np.empty(n)
    wbar = np.empty(n)
    x_new = np.empty(n + 1)
    u_new = np.empty(n + 1)
    u_prev = u0.copy()
    guess = np.empty(n + 1)
    for step in range(nsteps):
        bl = sig_l[step + 1]
        br = sig_r[step + 1]
        if scheme == 0:
            status = imex_kernel(u, x, dt, fo, kc, cc, bounds, bl, br, u_new)
        elif scheme == 1:
            monitor_kernel(u, x, mon[0], mon[1], mon[2], mon[3], w)
            if not smooth_kernel(w, mon[5], wbar):
                return U, X, q_l, q_r, diag_out, _SINGULAR, step, u, x
            if not advance_kernel(x, wbar, dt, mon[4], x_new):
                return U, X, q_l, q_r, diag_out, _SINGULAR, step, u, x
            wmin = np.inf
            total = 0.0
            for j in range(n):
                wd = x_new[j + 1] - x_new[j]
                wmin = min(wmin, wd)
                total += wd
                if abs(x_new[j] - x[j]) > min(x[j + 1] - x[j], x[j] - x[j - 1] if j > 0 else np.inf):
                    diag_out[3] += 1
            if wmin <= 0.0:
                return U, X, q_l, q_r, diag_out, _CROSSED, step, u, x
            diag_out[0] = min(diag_out[0], wmin)
            diag_out[1] = max(diag_out[1], abs(total - length))
            status = qunt_kernel(u, x, x_new, dt, fo, kc, cc, bounds, bl, br, jac_new, u_new)
            x[:] = x_new
        else:
            if step == 0:
                guess[:] = u
            else:
                for j in range(n + 1):
                    guess[j] = 2.0 * u[j] - u_prev[j]
            status, solves = cn_kernel(u, x, dt, fo, kc, cc, bounds, bl, br, linear,
                                       fp_tol, fp_max_iter, u_new, guess)
            diag_out[2] = max(diag_out[2], solves)
        if status != _OK:
            return U, X, q_l, q_r, diag_out, status, step, u, x
        u_prev[:] = u
        u[:] = u_new
        q_l[step + 1] = _flux(u, x, kc, bounds, False)
        q_r[step + 1] = _flux(u, x, kc, bounds, True)
        if (step + 1) % stride == 0:
            U[(step + 1) // stride] = u
            X[(step + 1) // stride] = x
    return U, X, q_l, q_r, diag_out, _OK, -1, u, x


# ---------------------------------------------------------------------------
# Python-level steppers
# ---------------------------------------------------------------------------


def _law_arrays(problem: DimensionlessProblem):
    return (np.ascontiguousarray(problem.kstar.coefficients),
            np.ascontiguousarray(problem.cstar.coefficients),
            np.ascontiguousarray(problem.kstar.bounds))


def _raise_status(status: int, where: str, fp_max_iter: int | None = None):
    if status == _SINGULAR:
        raise SingularSystemError(f"singular or non-dominant system {where}")
    if status == _CROSSED:
        raise MeshError(f"mesh nodes crossed {where}; increase beta_mesh or reduce dt")
    if status == _NO_FP:
        raise ConvergenceError(f"fixed-point iteration did not converge in {fp_max_iter} sweeps {where}")


def _check_uniform(mesh: MovingMesh):
    w = mesh.widths
    if np.max(np.abs(w - mesh.length / mesh.n)) > 1e-12 * mesh.length:
        raise ValueError("this scheme needs a uniform mesh")


def step_imex_uniform(state: FieldState, problem: DimensionlessProblem, dt: float) -> FieldState:
    """One IMEX step on a fixed uniform mesh (boundary data taken at ``t + dt``)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    _check_uniform(state.mesh)
    kc, cc, bounds = _law_arrays(problem)
    t1 = state.t + dt
    out = np.empty_like(state.u)
    status = imex_kernel(np.array(state.u), np.array(state.mesh.nodes), float(dt),
                         float(problem.fo), kc, cc, bounds,
                         problem.left_bc.rows(t1)[0], problem.right_bc.rows(t1)[0], out)
    _raise_status(status, f"at t={t1}")
    return FieldState(out, state.mesh, t1)


def step_qunt(state: FieldState, problem: DimensionlessProblem, cfg: MonitorConfig,
              dt: float, jacobian_level: Literal["n", "n+1"] = "n") -> FieldState:
    """One moving-grid step.

    The monitor is evaluated on the old field and mesh and smoothed, the mesh
    is advanced, then the field equation is solved on the new mesh with the
    mesh-speed term.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    w = smooth_monitor(evaluate_monitor(state.u, state.mesh, cfg), cfg.sigma)
    new_mesh = advance_mesh(state.mesh, w, dt, cfg.beta_mesh)
    x_old, x_new = state.mesh.nodes, new_mesh.nodes
    moved = np.abs(x_new - x_old)[1:-1]
    local = np.minimum(np.diff(x_old)[:-1], np.diff(x_old)[1:])
    if np.any(moved > local):
        warnings.warn("a mesh node moved further than its local interval width in one step",
                      RuntimeWarning, stacklevel=2)
    kc, cc, bounds = _law_arrays(problem)
    t1 = state.t + dt
    out = np.empty_like(state.u)
    status = qunt_kernel(np.array(state.u), np.array(x_old), np.array(x_new), float(dt),
                         float(problem.fo), kc, cc, bounds,
                         problem.left_bc.rows(t1)[0], problem.right_bc.rows(t1)[0],
                         jacobian_level == "n+1", out)
    _raise_status(status, f"at t={t1}")
    return FieldState(out, new_mesh, t1)


def step_crank_nicolson(state: FieldState, problem: DimensionlessProblem, dt: float,
                        fp_tol: float = 1e-12, fp_max_iter: int = 50,
                        return_iterations: bool = False):
    """Crank-Nicolson step with fixed-point resolution of the coefficients.

    With ``return_iterations=True`` the number of linear solves is returned too
    (1 for a linear problem).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    _check_uniform(state.mesh)
    kc, cc, bounds = _law_arrays(problem)
    t1 = state.t + dt
    out = np.empty_like(state.u)
    status, solves = cn_kernel(np.array(state.u), np.array(state.mesh.nodes), float(dt),
                               float(problem.fo), kc, cc, bounds,
                               problem.left_bc.rows(t1)[0], problem.right_bc.rows(t1)[0],
                               problem.is_linear, float(fp_tol), int(fp_max_iter), out,
                               np.array(state.u))
    _raise_status(status, f"at t={t1}", fp_max_iter)
    new = FieldState(out, state.mesh, t1)
    return (new, solves) if return_iterations else new


def boundary_flux(state: FieldState, problem: DimensionlessProblem,
                  side: Literal["left", "right"]) -> float:
    """Dimensionless flux ``-k* du/dx*`` at an end node.

    Uses the three-point one-sided difference on the actual (possibly
    non-uniform) node positions. Positive values point towards ``+x``.
    """
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    if state.u.size < 3:
        raise ValueError("need at least 3 nodes")
    kc, _, bounds = _law_arrays(problem)
    return float(_flux(np.array(state.u), np.array(state.mesh.nodes), kc, bounds, side == "right"))


def initial_state(problem: DimensionlessProblem, nx: int, scheme: str,
                  cfg: MonitorConfig | None = None, t0: float = 0.0) -> FieldState:
    """Initial field on the uniform mesh, or on the equidistributed mesh for QUNT."""
    if nx < 5:
        raise ValueError("nx must be at least 5")
    if scheme == "qunt":
        mesh = generate_initial_mesh(problem.initial, nx - 1, cfg or MonitorConfig())
    else:
        mesh = MovingMesh.uniform(nx - 1)
    u = np.asarray(problem.initial(mesh.nodes), dtype=float) * np.ones(nx)
    return FieldState(u, mesh, t0)


# ---------------------------------------------------------------------------
# Whole-run driver
# ---------------------------------------------------------------------------


@dataclass
class Trajectory:
    """Output of :func:`integrate`.

    ``times``/``u``/``x`` are the saved levels; ``flux_times``/``flux_left``/
    ``flux_right`` hold the dimensionless end fluxes at every step.
    """

    scheme: str
    dt: float
    save_every: int
    times: np.ndarray
    u: np.ndarray
    x: np.ndarray
    flux_times: np.ndarray
    flux_left: np.ndarray
    flux_right: np.ndarray
    final: FieldState
    min_width: float
    max_length_error: float
    max_solves: int
    fast_node_steps: int
    wall_seconds: float = 0.0


def integrate(problem: DimensionlessProblem, scheme: str, nx: int, dt: float, nsteps: int,
              cfg: MonitorConfig | None = None, save_every: int = 1,
              state: FieldState | None = None, jacobian_level: str = "n",
              fp_tol: float = 1e-12, fp_max_iter: int = 50) -> Trajectory:
    """Advance ``nsteps`` steps with one scheme inside a compiled loop.

    Boundary signals are sampled once on the time grid ``t0 + n dt``.
    """
    import time

    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}")
    if dt <= 0 or nsteps < 0 or save_every < 1:
        raise ValueError("dt must be positive, nsteps >= 0 and save_every >= 1")
    cfg = cfg or MonitorConfig()
    if state is None:
        state = initial_state(problem, nx, scheme, cfg)
    elif scheme == "imex":
        _check_uniform(state.mesh)
    t0 = state.t
    times = t0 + dt * np.arange(nsteps + 1)
    sig_l = np.ascontiguousarray(problem.left_bc.rows(times))
    sig_r = np.ascontiguousarray(problem.right_bc.rows(times))
    kc, cc, bounds = _law_arrays(problem)
    mon = np.array([cfg.alpha1, cfg.beta1, cfg.alpha2, cfg.beta2, cfg.beta_mesh, cfg.sigma])
    tic = time.perf_counter()
    U, X, q_l, q_r, diag, status, bad, u_end, x_end = march_kernel(
        _SCHEME_CODE[scheme], np.array(state.u), np.array(state.mesh.nodes), float(dt),
        int(nsteps), int(save_every), float(problem.fo), kc, cc, bounds, sig_l, sig_r,
        mon, jacobian_level == "n+1", problem.is_linear, float(fp_tol), int(fp_max_iter))
    wall = time.perf_counter() - tic
    if status != _OK:
        _raise_status(status, f"in step {bad} (t={times[bad]:.6g}, scheme {scheme})", fp_max_iter)
    if int(diag[3]) > 0:
        warnings.warn(f"{int(diag[3])} steps moved a node further than its local interval",
                      RuntimeWarning, stacklevel=2)
    return Trajectory(
        scheme=scheme,
        dt=dt,
        save_every=save_every,
        times=times[::save_every][: U.shape[0]],
        u=U,
        x=X,
        flux_times=times,
        flux_left=q_l,
        flux_right=q_r,
        final=FieldState(u_end, MovingMesh(x_end, state.mesh.length), times[-1]),
        min_width=float(diag[0]),
        max_length_error=float(diag[1]),
        max_solves=int(diag[2]),
        fast_node_steps=int(diag[3]),
        wall_seconds=wall,
    )
