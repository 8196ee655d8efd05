"""Hourly climate series: CSV ingestion, export and a synthetic generator.

CSV layout (one header row, one row per hour)::

    timestamp_iso8601,t_out_C,q_solar_N_Wm2,q_solar_S_Wm2,q_solar_E_Wm2,q_solar_W_Wm2,q_solar_H_Wm2[,t_sky_C]

Temperatures are kept in degrees Celsius inside :class:`ClimateSeries` so that a
write/read cycle is bit-exact; the ``*_K`` properties give kelvin.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

__all__ = [
    "CITY_PROFILES",
    "ORIENTATIONS",
    "ClimateError",
    "ClimateProfile",
    "ClimateSeries",
    "load_climate_csv",
    "synthesize_climate",
    "write_climate_csv",
]

KELVIN = 273.15
HOUR = 3600.0
ORIENTATIONS = ("N", "S", "E", "W", "H")
SKY_OFFSET_K = 10.0

_BASE_COLUMNS = ["timestamp_iso8601", "t_out_C"] + [f"q_solar_{o}_Wm2" for o in ORIENTATIONS]
_SKY_COLUMN = "t_sky_C"


class ClimateError(ValueError):
    """Malformed or inconsistent climate input."""


@dataclass(frozen=True)
class ClimateSeries:
    """Hourly weather for one site.

    Attributes
    ----------
    start : datetime
        Timestamp of the first row.
    t_out_C : ndarray
        Outdoor air temperature, degrees C.
    q_solar : dict
        Orientation (``N``, ``S``, ``E``, ``W``, ``H`` for horizontal) to incident
        solar flux, W/m^2.
    t_sky_C : ndarray
        Sky temperature, degrees C.
    """

    start: datetime
    t_out_C: np.ndarray
    q_solar: dict
    t_sky_C: np.ndarray
    sky_from_file: bool = field(default=True, compare=False)

    def __post_init__(self):
        t = np.array(self.t_out_C, dtype=float)
        n = t.size
        if t.ndim != 1 or n < 2:
            raise ClimateError("a climate series needs at least two hourly rows")
        sky = np.array(self.t_sky_C, dtype=float)
        q = {}
        for o in ORIENTATIONS:
            if o not in self.q_solar:
                raise ClimateError(f"missing solar series for orientation {o}")
            q[o] = np.array(self.q_solar[o], dtype=float)
        for name, arr in [("t_out_C", t), ("t_sky_C", sky)] + [(f"q_solar[{o}]", v) for o, v in q.items()]:
            if arr.shape != (n,):
                raise ClimateError(f"{name} has {arr.size} values, expected {n}")
            if not np.all(np.isfinite(arr)):
                raise ClimateError(f"{name} contains non-finite values")
        for o, v in q.items():
            if np.any(v < 0):
                raise ClimateError(f"negative solar flux for orientation {o} at row {int(np.argmax(v < 0))}")
        for arr in [t, sky, *q.values()]:
            arr.setflags(write=False)
        object.__setattr__(self, "t_out_C", t)
        object.__setattr__(self, "t_sky_C", sky)
        object.__setattr__(self, "q_solar", q)

    def __len__(self) -> int:
        return self.t_out_C.size

    @property
    def times(self) -> np.ndarray:
        """Seconds since ``start``."""
        return HOUR * np.arange(len(self))

    @property
    def timestamps(self) -> list[datetime]:
        return [self.start + timedelta(hours=i) for i in range(len(self))]

    @property
    def duration(self) -> float:
        """Seconds covered when the series is read as periodic (one hour per row)."""
        return HOUR * len(self)

    @property
    def t_out_K(self) -> np.ndarray:
        return self.t_out_C + KELVIN

    @property
    def t_sky_K(self) -> np.ndarray:
        return self.t_sky_C + KELVIN

    @classmethod
    def constant(cls, hours: int, t_out_C: float, q_solar: float = 0.0,
                 t_sky_C: float | None = None, start: datetime | None = None) -> "ClimateSeries":
        """Steady weather, handy for equilibrium and steady-state checks."""
        ones = np.ones(hours)
        sky = t_out_C - SKY_OFFSET_K if t_sky_C is None else t_sky_C
        return cls(start or datetime(2021, 1, 1), t_out_C * ones,
                   {o: q_solar * ones for o in ORIENTATIONS}, sky * ones)

    def signal(self, values: np.ndarray):
        """Periodic piecewise-linear interpolant ``f(t_seconds)`` of an hourly column."""
        tk = np.append(self.times, self.duration)
        vk = np.append(values, values[0])
        period = self.duration

        def f(t):
            return np.interp(np.mod(t, period), tk, vk)

        return f


def write_climate_csv(series: ClimateSeries, path: str | Path, include_sky: bool = True) -> Path:
    """Write ``series`` with full double precision."""
    path = Path(path)
    header = _BASE_COLUMNS + ([_SKY_COLUMN] if include_sky else [])
    with path.open("w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(header)
        for i, ts in enumerate(series.timestamps):
            row = [ts.isoformat(), repr(float(series.t_out_C[i]))]
            row += [repr(float(series.q_solar[o][i])) for o in ORIENTATIONS]
            if include_sky:
                row.append(repr(float(series.t_sky_C[i])))
            out.writerow(row)
    return path


def load_climate_csv(path: str | Path, sky_offset: float = SKY_OFFSET_K) -> ClimateSeries:
    """Read and validate an hourly climate file.

    A missing ``t_sky_C`` column is replaced by ``t_out_C - sky_offset``.

    Raises
    ------
    ClimateError
        Missing columns, unparsable values, gaps or non-hourly spacing, negative
        solar flux. Messages name the offending data row (1 = first row after
        the header).
    """
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise ClimateError(f"cannot read climate file {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ClimateError(f"{path} is empty") from None
        missing = [c for c in _BASE_COLUMNS if c not in header]
        if missing:
            raise ClimateError(f"{path}: missing columns {missing}")
        has_sky = _SKY_COLUMN in header
        idx = {c: header.index(c) for c in _BASE_COLUMNS + ([_SKY_COLUMN] if has_sky else [])}
        stamps, cols = [], {c: [] for c in idx if c != "timestamp_iso8601"}
        for row_no, row in enumerate(reader, start=1):
            if not row:
                continue
            try:
                stamps.append(datetime.fromisoformat(row[idx["timestamp_iso8601"]].strip()))
                for c in cols:
                    cols[c].append(float(row[idx[c]]))
            except (ValueError, IndexError) as exc:
                raise ClimateError(f"{path}: row {row_no}: {exc}") from None
    if len(stamps) < 2:
        raise ClimateError(f"{path}: need at least two data rows")
    for i in range(1, len(stamps)):
        step = (stamps[i] - stamps[i - 1]).total_seconds()
        if step != HOUR:
            raise ClimateError(
                f"{path}: row {i + 1} is {step / HOUR:g} h after the previous row (expected 1 h)")
    for o in ORIENTATIONS:
        v = np.asarray(cols[f"q_solar_{o}_Wm2"])
        if np.any(v < 0):
            raise ClimateError(f"{path}: row {int(np.argmax(v < 0)) + 1}: negative solar flux ({o})")
    t_out = np.asarray(cols["t_out_C"])
    sky = np.asarray(cols[_SKY_COLUMN]) if has_sky else t_out - sky_offset
    return ClimateSeries(stamps[0], t_out, {o: cols[f"q_solar_{o}_Wm2"] for o in ORIENTATIONS},
                         sky, sky_from_file=has_sky)


# -- synthetic weather -------------------------------------------------------


@dataclass(frozen=True)
class ClimateProfile:
    """Targets for the synthetic generator.

    ``t_min``/``t_mean``/``t_max`` are matched exactly by the noise-free
    temperature signal. ``solar_peak`` is the clear-sky peak on a horizontal
    surface and ``clearness`` scales every day's irradiance (1 = cloudless).
    ``annual_share`` is the fraction of the half-range carried by the seasonal
    cycle; the rest is the daily cycle.
    """

    name: str
    t_min: float
    t_mean: float
    t_max: float
    latitude: float
    solar_peak: float = 1000.0
    clearness: float = 0.6
    noise: float = 1.0
    cloud_noise: float = 0.15
    seed: int = 0
    annual_share: float = 0.55
    sky_offset: float = SKY_OFFSET_K
    year: int = 2021

    def __post_init__(self):
        if not self.t_min <= self.t_mean <= self.t_max:
            raise ClimateError("profile needs t_min <= t_mean <= t_max")
        if self.t_min == self.t_max:
            raise ClimateError("profile needs t_max > t_min")
        if not -90 <= self.latitude <= 90:
            raise ClimateError("latitude must lie in [-90, 90]")
        if self.solar_peak < 0 or not 0 <= self.clearness <= 1:
            raise ClimateError("solar_peak must be >= 0 and clearness in [0, 1]")
        if self.noise < 0 or self.cloud_noise < 0:
            raise ClimateError("noise levels must be nonnegative")
        if not 0 < self.annual_share < 1:
            raise ClimateError("annual_share must lie in (0, 1)")

    def with_(self, **changes) -> "ClimateProfile":
        from dataclasses import replace
        return replace(self, **changes)


CITY_PROFILES = {
    "curitiba": ClimateProfile("Curitiba", -2.0, 16.3, 30.9, -25.5),
    "rio_de_janeiro": ClimateProfile("Rio de Janeiro", 13.0, 23.5, 38.2, -22.9),
    "sao_paulo": ClimateProfile("Sao Paulo", 7.5, 18.8, 32.8, -23.5),
    "salvador": ClimateProfile("Salvador", 14.2, 25.3, 33.5, -12.9),
}


def _warmest_day(latitude: float) -> float:
    """Day of year (0-based) of the seasonal temperature peak."""
    return 14.0 if latitude < 0 else 195.0


def _temperature(profile: ClimateProfile, day: np.ndarray, hour: np.ndarray,
                 rng: np.random.Generator) -> np.ndarray:
    a = profile.annual_share
    seasonal = np.cos(2 * np.pi * (day - _warmest_day(profile.latitude)) / 365.0)
    daily = np.cos(2 * np.pi * (hour - 15.0) / 24.0)
    s = a * seasonal + (1 - a) * daily
    # quadratic map g(s) = p s + r (s^2 - <s^2>) puts the extremes of s on
    # t_max/t_min while keeping the mean at t_mean
    m2 = np.mean(s**2)
    p = 0.5 * (profile.t_max - profile.t_min)
    r = (0.5 * (profile.t_max + profile.t_min) - profile.t_mean) / (1.0 - m2)
    if abs(2 * r) >= p:
        raise ClimateError("profile is too skewed for a monotone temperature map")
    smax, smin = s.max(), s.min()
    # stretch so the sampled extremes are exactly +-1
    s = np.where(s >= 0, s / smax, -s / smin)
    # g(s) = mid - c + p s + c s^2 meets both extremes; c fixes the mean
    mid = 0.5 * (profile.t_max + profile.t_min)
    c = (mid + p * np.mean(s) - profile.t_mean) / (1.0 - np.mean(s**2))
    if abs(2 * c) >= p:
        raise ClimateError("profile is too skewed for a monotone temperature map")
    t = mid - c + p * s + c * s**2
    if profile.noise > 0:
        # AR(1) weather noise with a one-day correlation time
        phi = np.exp(-1.0 / 24.0)
        eps = rng.standard_normal(t.size) * profile.noise * np.sqrt(1 - phi**2)
        z = np.empty_like(t)
        z[0] = rng.standard_normal() * profile.noise
        for i in range(1, t.size):
            z[i] = phi * z[i - 1] + eps[i]
        t = t + z
    return t


def _solar(profile: ClimateProfile, day: np.ndarray, hour: np.ndarray,
           rng: np.random.Generator) -> dict:
    """Clear-sky beam plus diffuse irradiance on the five surfaces, then cloud-scaled."""
    phi = np.radians(profile.latitude)
    n = day + 1.0
    decl = np.radians(23.45) * np.sin(2 * np.pi * (284.0 + n) / 365.0)
    omega = np.radians(15.0 * (hour + 0.5 - 12.0))
    up = np.sin(phi) * np.sin(decl) + np.cos(phi) * np.cos(decl) * np.cos(omega)
    east = -np.cos(decl) * np.sin(omega)
    north = np.cos(phi) * np.sin(decl) - np.sin(phi) * np.cos(decl) * np.cos(omega)
    extra = 1367.0 * (1.0 + 0.033 * np.cos(2 * np.pi * n / 365.0))
    day_lit = up > 0.01
    airmass = np.where(day_lit, 1.0 / np.maximum(up, 0.01), np.inf)
    tau_b = np.where(day_lit, 0.7 ** (airmass**0.678), 0.0)
    dni = extra * tau_b
    dhi = np.where(day_lit, extra * up * (0.271 - 0.294 * tau_b), 0.0)
    ghi = dni * np.maximum(up, 0.0) + dhi
    scale = profile.solar_peak / ghi.max() if ghi.max() > 0 else 0.0
    clear = np.full(365, profile.clearness)
    if profile.cloud_noise > 0:
        clear = np.clip(clear + profile.cloud_noise * rng.standard_normal(365), 0.05, 1.0)
    factor = scale * clear[day.astype(int)]
    ground = 0.2
    normals = {"N": north, "S": -north, "E": east, "W": -east}
    out = {}
    for o, cos_inc in normals.items():
        vert = dni * np.maximum(cos_inc, 0.0) + 0.5 * dhi + 0.5 * ground * ghi
        out[o] = np.where(day_lit, vert, 0.0) * factor
    out["H"] = ghi * factor
    return out


def synthesize_climate(profile: ClimateProfile, hours: int = 8760) -> ClimateSeries:
    """Deterministic hourly weather: the first ``hours`` rows of whole synthetic years.

    Seasonal and daily cosines are combined and mapped so that the noise-free
    series hits ``t_min``, ``t_mean`` and ``t_max`` of the profile; seeded AR(1)
    noise is added on top. Solar flux follows the sun position for the
    profile's latitude, so in the Southern hemisphere the North facade
    collects the most. The sky is ``sky_offset`` kelvin below the air.
    """
    if hours < 24:
        raise ClimateError("need at least one day of data")
    rng = np.random.default_rng(profile.seed)
    # whole years are generated so that shorter series are prefixes of the full one
    i = np.arange(-(-hours // 8760) * 8760)
    day = (i // 24) % 365
    hour = (i % 24).astype(float)
    t = _temperature(profile, day.astype(float), hour, rng)[:hours]
    q = {o: v[:hours] for o, v in _solar(profile, day, hour, rng).items()}
    return ClimateSeries(datetime(profile.year, 1, 1), t, q, t - profile.sky_offset,
                         sky_from_file=False)
