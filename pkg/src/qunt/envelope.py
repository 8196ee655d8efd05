"""Building-envelope application: materials, assemblies, yearly simulation and loads.

Coordinates run from the room (``x = 0``) to the outdoor surface (``x = l``).
The inner surface exchanges heat by convection with the room air; the outer
surface by convection with the outdoor air, absorbs solar radiation and, for
roofs, exchanges long-wave radiation with the sky.

Flux sign convention for reports: positive = heat entering the room (a cooling
load), negative = heat leaving it (a heating load).
"""
from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .climate import KELVIN, ClimateSeries
from .errors import NumericalError
from .gridmotion import MonitorConfig
from .pdesolver import (
    SCHEMES,
    FieldState,
    PhysicalBoundary,
    PhysicalLayer,
    PhysicalProblem,
    ReferenceScales,
    integrate,
    nondimensionalize,
    redimensionalize_flux,
)

__all__ = [
    "BRICK",
    "CONCRETE",
    "ENVELOPE_MONITOR",
    "XPS",
    "IndoorSchedule",
    "LoadReport",
    "Material",
    "SolverSettings",
    "SweepRow",
    "WallAssembly",
    "YearResult",
    "roof",
    "series_resistance_flux",
    "simulate_year",
    "sweep_thickness",
    "transmission_loads",
    "wall1",
    "wall2",
    "wall3",
    "write_flux_csv",
    "write_loads_csv",
    "write_sweep_csv",
]

log = logging.getLogger(__name__)

DAY = 86400.0
ORIENTATION_NAMES = ("N", "S", "E", "W", "Roof")


@dataclass(frozen=True)
class Material:
    name: str
    rho: float  # kg/m^3
    cp: float  # J/(kg K)
    k: float  # W/(m K)

    def __post_init__(self):
        if min(self.rho, self.cp, self.k) <= 0:
            raise ValueError(f"material {self.name!r}: properties must be positive")

    @property
    def capacity(self) -> float:
        """Volumetric heat capacity, J/(m^3 K)."""
        return self.rho * self.cp


BRICK = Material("Brick", 1800.0, 840.0, 0.69)
CONCRETE = Material("Concrete", 2200.0, 840.0, 2.0)
XPS = Material("Extruded Polystyrene", 25.0, 1470.0, 0.0275)
MATERIALS = {"brick": BRICK, "concrete": CONCRETE, "xps": XPS}


@dataclass(frozen=True)
class WallAssembly:
    """Layers listed from the room side outwards.

    Long-wave exchange with the sky is switched on for roofs unless
    ``longwave`` says otherwise.
    """

    layers: tuple
    orientation: str = "S"
    solar_absorptivity: float = 0.5
    emissivity: float = 0.9
    h_inside: float = 10.0
    h_outside: float = 25.0
    longwave: bool | None = None

    def __post_init__(self):
        layers = tuple((m, float(t)) for m, t in self.layers)
        if not layers:
            raise ValueError("an assembly needs at least one layer")
        for m, t in layers:
            if not isinstance(m, Material):
                raise TypeError("layers must be (Material, thickness) pairs")
            if not t > 0:
                raise ValueError(f"layer {m.name!r} has nonpositive thickness {t}")
        if self.orientation not in ORIENTATION_NAMES:
            raise ValueError(f"orientation must be one of {ORIENTATION_NAMES}")
        if not 0 <= self.solar_absorptivity <= 1 or not 0 <= self.emissivity <= 1:
            raise ValueError("absorptivity and emissivity must lie in [0, 1]")
        if self.h_inside < 0 or self.h_outside < 0:
            raise ValueError("convective coefficients must be nonnegative")
        object.__setattr__(self, "layers", layers)

    @property
    def thickness(self) -> float:
        return float(sum(t for _, t in self.layers))

    @property
    def radiative(self) -> bool:
        return self.orientation == "Roof" if self.longwave is None else bool(self.longwave)

    @property
    def solar_key(self) -> str:
        """Column of the climate file that drives the outer surface."""
        return "H" if self.orientation == "Roof" else self.orientation

    def physical_layers(self) -> tuple:
        return tuple(PhysicalLayer(t, m.k, m.capacity) for m, t in self.layers)

    def resistance(self) -> float:
        """Air-to-air thermal resistance, m^2 K/W."""
        return 1.0 / self.h_inside + sum(t / m.k for m, t in self.layers) + 1.0 / self.h_outside

    def mirrored(self) -> "WallAssembly":
        """Same wall seen from the other side (layers reversed, film coefficients swapped)."""
        return replace(self, layers=tuple(reversed(self.layers)),
                       h_inside=self.h_outside, h_outside=self.h_inside)


def wall1(orientation: str = "S", **kw) -> WallAssembly:
    """Brick only."""
    return WallAssembly(((BRICK, 0.15),), orientation, **kw)


def wall2(insulation: float, orientation: str = "S", **kw) -> WallAssembly:
    """Insulation on the room side of the brick."""
    return WallAssembly(((XPS, insulation), (BRICK, 0.15)), orientation, **kw)


def wall3(insulation: float, orientation: str = "S", **kw) -> WallAssembly:
    """Insulation on the outdoor side of the brick."""
    return WallAssembly(((BRICK, 0.15), (XPS, insulation)), orientation, **kw)


def roof(insulation: float, position: str = "outside", **kw) -> WallAssembly:
    """Flat concrete roof with insulation inside or outside."""
    if position not in ("inside", "outside"):
        raise ValueError("position must be 'inside' or 'outside'")
    layers = ((XPS, insulation), (CONCRETE, 0.15))
    if position == "outside":
        layers = layers[::-1]
    return WallAssembly(layers, "Roof", **kw)


def series_resistance_flux(assembly: WallAssembly, delta_T: float) -> float:
    """Steady flux ``delta_T / R`` through the assembly, W/m^2."""
    return delta_T / assembly.resistance()


@dataclass(frozen=True)
class IndoorSchedule:
    """Room air temperature swinging sinusoidally between two set points.

    The warm peak falls on ``peak_day`` (0-based day of year), mid January by
    default, i.e. the Southern-hemisphere summer.
    """

    summer_setpoint: float = 25.0  # deg C
    winter_setpoint: float = 20.0  # deg C
    peak_day: float = 14.0

    def __post_init__(self):
        if self.summer_setpoint < self.winter_setpoint:
            raise ValueError("summer set point must not be below the winter one")

    @classmethod
    def for_latitude(cls, latitude: float, **kw) -> "IndoorSchedule":
        return cls(peak_day=14.0 if latitude < 0 else 195.0, **kw)

    @classmethod
    def constant(cls, value: float) -> "IndoorSchedule":
        return cls(value, value)

    def celsius(self, t, start: datetime = datetime(2021, 1, 1)):
        """Room temperature (deg C) at ``t`` seconds after ``start``."""
        day0 = (start - datetime(start.year, 1, 1)).total_seconds() / DAY
        mid = 0.5 * (self.summer_setpoint + self.winter_setpoint)
        amp = 0.5 * (self.summer_setpoint - self.winter_setpoint)
        day = day0 + np.asarray(t, dtype=float) / DAY
        return mid + amp * np.cos(2 * np.pi * (day - self.peak_day) / 365.0)


@dataclass(frozen=True)
class SolverSettings:
    """Scheme, node count, dimensionless step and monitor used for envelope runs."""

    scheme: str = "qunt"
    nx: int = 41
    dt: float = 0.1
    monitor: MonitorConfig = field(default_factory=lambda: ENVELOPE_MONITOR)
    t0: float = 3600.0
    T0: float = 293.15

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.nx < 5:
            raise ValueError("nx must be at least 5")
        if not self.dt > 0 or not self.t0 > 0 or not self.T0 > 0:
            raise ValueError("dt, t0 and T0 must be positive")


ENVELOPE_MONITOR = MonitorConfig(alpha1=0.8, beta1=2.0, alpha2=0.2, beta2=3.0,
                                 beta_mesh=50.0, sigma=5.0)


# -- loads --------------------------------------------------------------------


def _signed_parts(t0, t1, q0, q1):
    """Integrals of the positive and negative parts of a linear segment."""
    dt = t1 - t0
    pos = np.zeros_like(q0)
    neg = np.zeros_like(q0)
    both_pos = (q0 >= 0) & (q1 >= 0)
    both_neg = (q0 <= 0) & (q1 <= 0)
    pos[both_pos] = (0.5 * (q0 + q1) * dt)[both_pos]
    neg[both_neg & ~both_pos] = (0.5 * (q0 + q1) * dt)[both_neg & ~both_pos]
    cross = ~(both_pos | both_neg)
    if np.any(cross):
        a, b, d = q0[cross], q1[cross], dt[cross]
        tz = d * np.abs(a) / (np.abs(a) + np.abs(b))  # zero crossing
        first = 0.5 * a * tz
        second = 0.5 * b * (d - tz)
        pos[cross] = np.where(a > 0, first, second)
        neg[cross] = np.where(a > 0, second, first)
    return pos, neg


@dataclass(frozen=True)
class LoadReport:
    """Inner-surface flux and its integrals.

    Loads are in MJ/m^2; ``heating`` values are negative (integral of the
    negative flux part), ``cooling`` values positive.
    """

    start: datetime
    times: np.ndarray  # s since start
    flux: np.ndarray  # W/m^2, positive into the room
    days: list  # dates
    daily_heating: np.ndarray
    daily_cooling: np.ndarray
    months: list  # (year, month)
    monthly_heating: np.ndarray
    monthly_cooling: np.ndarray

    @property
    def annual_heating(self) -> float:
        return float(np.sum(self.monthly_heating))

    @property
    def annual_cooling(self) -> float:
        return float(np.sum(self.monthly_cooling))

    @property
    def annual_net(self) -> float:
        return self.annual_heating + self.annual_cooling

    @property
    def annual_total(self) -> float:
        """``|heating| + |cooling|``, the load used for costing."""
        return abs(self.annual_heating) + abs(self.annual_cooling)


def transmission_loads(times, flux, start: datetime = datetime(2021, 1, 1)) -> LoadReport:
    """Integrate a flux series into daily, monthly and annual loads.

    The series is treated as piecewise linear (trapezoidal rule). Each segment
    is split at calendar-day boundaries and at zero crossings, so the heating
    and cooling parts are integrated exactly for the interpolant.

    Parameters
    ----------
    times : array
        Seconds since ``start``, strictly increasing.
    flux : array
        W/m^2, positive into the room.
    """
    t = np.asarray(times, dtype=float)
    q = np.asarray(flux, dtype=float)
    if t.shape != q.shape or t.ndim != 1 or t.size < 2:
        raise ValueError("times and flux must be 1D arrays of equal length >= 2")
    if np.any(np.diff(t) <= 0):
        raise ValueError("timestamps must be strictly increasing")
    if not np.all(np.isfinite(q)):
        raise ValueError("flux contains non-finite values")
    # insert day boundaries as extra knots
    cuts = np.arange(np.ceil(t[0] / DAY), np.floor(t[-1] / DAY) + 1) * DAY
    cuts = cuts[(cuts > t[0]) & (cuts < t[-1])]
    tk = np.union1d(t, cuts)
    qk = np.interp(tk, t, q)
    pos, neg = _signed_parts(tk[:-1], tk[1:], qk[:-1], qk[1:])
    day_idx = np.floor(tk[:-1] / DAY).astype(int)
    first = day_idx[0]
    nd = day_idx[-1] - first + 1
    daily_c = np.bincount(day_idx - first, weights=pos, minlength=nd) / 1e6
    daily_h = np.bincount(day_idx - first, weights=neg, minlength=nd) / 1e6
    days = [(start + timedelta(days=int(first + i))).date() for i in range(nd)]
    months: list = []
    mh, mc = [], []
    for d, h, c in zip(days, daily_h, daily_c):
        key = (d.year, d.month)
        if not months or months[-1] != key:
            months.append(key)
            mh.append(0.0)
            mc.append(0.0)
        mh[-1] += h
        mc[-1] += c
    return LoadReport(start, t, q, days, daily_h, daily_c, months, np.array(mh), np.array(mc))


# -- yearly simulation ---------------------------------------------------------


@dataclass
class YearResult:
    loads: LoadReport
    final: FieldState
    scales: ReferenceScales
    min_width: float
    wall_seconds: float


def _problem(assembly: WallAssembly, climate: ClimateSeries, schedule: IndoorSchedule,
             scales: ReferenceScales) -> PhysicalProblem:
    t_out = climate.signal(climate.t_out_K)
    q_sun = climate.signal(climate.q_solar[assembly.solar_key])
    t_sky = climate.signal(climate.t_sky_K)
    start = climate.start

    def t_in(t):
        return schedule.celsius(t, start) + KELVIN

    inside = PhysicalBoundary("robin", t_in, h=assembly.h_inside)
    outside = PhysicalBoundary(
        "robin_radiative" if assembly.radiative else "robin",
        t_out,
        h=assembly.h_outside,
        absorbed_flux=lambda t: assembly.solar_absorptivity * q_sun(t),
        emissivity=assembly.emissivity if assembly.radiative else 0.0,
        sky=t_sky,
    )
    l = assembly.thickness
    T_in0, T_out0 = float(t_in(0.0)), float(t_out(0.0))

    def initial(x):
        # linear profile between the two air temperatures at t = 0
        return T_in0 + (T_out0 - T_in0) * np.asarray(x) / l

    return PhysicalProblem(assembly.physical_layers(), inside, outside, initial)


def simulate_year(assembly: WallAssembly, climate: ClimateSeries,
                  schedule: IndoorSchedule | None = None,
                  solver: SolverSettings | None = None,
                  horizon: float | None = None,
                  state: FieldState | None = None) -> YearResult:
    """Run the envelope model over the climate series and integrate the loads.

    Parameters
    ----------
    horizon : float, optional
        Simulated seconds; defaults to the climate length (8760 h for a year).
        The climate is read as periodic beyond its last row.
    state : FieldState, optional
        Start from this dimensionless state instead of the linear profile.
    """
    schedule = schedule or IndoorSchedule()
    solver = solver or SolverSettings()
    horizon = climate.duration if horizon is None else float(horizon)
    first = assembly.layers[0][0]
    scales = ReferenceScales(T0=solver.T0, t0=solver.t0, l=assembly.thickness,
                             k0=first.k, c0=first.capacity)
    problem = nondimensionalize(_problem(assembly, climate, schedule, scales), scales)
    nsteps = int(round(horizon / (solver.dt * solver.t0)))
    if nsteps < 1:
        raise ValueError("horizon shorter than one time step")
    try:
        traj = integrate(problem, solver.scheme, solver.nx, solver.dt, nsteps,
                         solver.monitor, save_every=nsteps, state=state)
    except NumericalError as exc:
        raise NumericalError(f"{assembly.orientation} assembly, {climate.start:%Y-%m-%d}: {exc}") from exc
    seconds = traj.flux_times * solver.t0
    # heat entering the room is the flux towards -x at the inner surface
    into_room = -redimensionalize_flux(traj.flux_left, scales)
    loads = transmission_loads(seconds, into_room, climate.start)
    return YearResult(loads, traj.final, scales, traj.min_width, traj.wall_seconds)


@dataclass(frozen=True)
class SweepRow:
    thickness: float
    heating: float = float("nan")
    cooling: float = float("nan")
    total: float = float("nan")
    error: str | None = None


def sweep_thickness(template: Callable[[float], WallAssembly], thicknesses: Iterable[float],
                    climate: ClimateSeries, schedule: IndoorSchedule | None = None,
                    solver: SolverSettings | None = None, workers: int = 1) -> list[SweepRow]:
    """Annual loads for each insulation thickness; failures are recorded, not raised."""
    ls = [float(l) for l in thicknesses]
    if any(not l > 0 for l in ls):
        raise ValueError("thicknesses must be positive")

    def one(l: float) -> SweepRow:
        try:
            rep = simulate_year(template(l), climate, schedule, solver).loads
        except (NumericalError, ValueError) as exc:
            log.warning("thickness %g m failed: %s", l, exc)
            return SweepRow(l, error=str(exc))
        return SweepRow(l, rep.annual_heating, rep.annual_cooling, rep.annual_total)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, ls))
    return [one(l) for l in ls]


# -- CSV output -----------------------------------------------------------------


def write_flux_csv(path: str | Path, report: LoadReport) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["timestamp_iso8601", "t_s", "flux_Wm2"])
        for t, q in zip(report.times, report.flux):
            out.writerow([(report.start + timedelta(seconds=float(t))).isoformat(), repr(float(t)),
                          repr(float(q))])
    return path


def write_loads_csv(path_daily: str | Path, path_monthly: str | Path,
                    report: LoadReport) -> tuple[Path, Path]:
    pd_, pm = Path(path_daily), Path(path_monthly)
    with pd_.open("w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["date", "heating_MJm2", "cooling_MJm2", "net_MJm2"])
        for d, h, c in zip(report.days, report.daily_heating, report.daily_cooling):
            out.writerow([d.isoformat(), repr(float(h)), repr(float(c)), repr(float(h + c))])
    with pm.open("w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["year", "month", "heating_MJm2", "cooling_MJm2", "net_MJm2"])
        for (y, m), h, c in zip(report.months, report.monthly_heating, report.monthly_cooling):
            out.writerow([y, m, repr(float(h)), repr(float(c)), repr(float(h + c))])
    return pd_, pm


def write_sweep_csv(path: str | Path, rows: Sequence[SweepRow]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["l_i_m", "heating_MJm2", "cooling_MJm2", "total_MJm2", "error"])
        for r in rows:
            out.writerow([repr(r.thickness), repr(r.heating), repr(r.cooling), repr(r.total),
                          r.error or ""])
    return path
