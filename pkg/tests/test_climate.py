from __future__ import annotations

from datetime import datetime

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qunt.climate import (
    CITY_PROFILES,
    ORIENTATIONS,
    ClimateError,
    ClimateProfile,
    ClimateSeries,
    load_climate_csv,
    synthesize_climate,
    write_climate_csv,
)


@pytest.fixture(scope="module")
def curitiba():
    return synthesize_climate(CITY_PROFILES["curitiba"])


def test_city_profiles_carry_the_published_extremes():
    expected = {"curitiba": (-2.0, 16.3, 30.9), "rio_de_janeiro": (13.0, 23.5, 38.2),
                "sao_paulo": (7.5, 18.8, 32.8), "salvador": (14.2, 25.3, 33.5)}
    for name, (lo, mean, hi) in expected.items():
        p = CITY_PROFILES[name]
        assert (p.t_min, p.t_mean, p.t_max) == (lo, mean, hi)
        assert p.latitude < 0


def test_noise_free_synthesis_hits_extremes_exactly():
    for p in CITY_PROFILES.values():
        c = synthesize_climate(p.with_(noise=0.0))
        assert len(c) == 8760
        assert c.t_out_C.min() == pytest.approx(p.t_min, abs=1e-9)
        assert c.t_out_C.max() == pytest.approx(p.t_max, abs=1e-9)
        assert c.t_out_C.mean() == pytest.approx(p.t_mean, abs=1e-9)


def test_synthetic_solar_is_physical(curitiba):
    q = curitiba.q_solar
    for o in ORIENTATIONS:
        assert np.all(q[o] >= 0)
    # night hours are dark on every face
    hours = np.arange(8760) % 24
    for o in ORIENTATIONS:
        assert np.all(q[o][(hours < 4) | (hours > 21)] == 0)
    # the horizontal face collects most; Southern hemisphere: north face beats south
    assert q["H"].sum() > q["N"].sum() > q["S"].sum()
    assert q["H"].max() <= 1000.0 + 1e-9
    # east faces receive mornings, west faces afternoons
    am, pm = hours < 12, hours >= 12
    assert q["E"][am].sum() > q["E"][pm].sum() and q["W"][pm].sum() > q["W"][am].sum()


def test_synthesis_is_deterministic_per_seed():
    p = CITY_PROFILES["salvador"]
    a, b = synthesize_climate(p, 200), synthesize_climate(p, 200)
    np.testing.assert_array_equal(a.t_out_C, b.t_out_C)
    c = synthesize_climate(p.with_(seed=1), 200)
    assert not np.array_equal(a.t_out_C, c.t_out_C)
    full = synthesize_climate(p)
    np.testing.assert_array_equal(a.t_out_C, full.t_out_C[:200])
    np.testing.assert_array_equal(a.q_solar["N"], full.q_solar["N"][:200])


def test_profile_validation():
    with pytest.raises(ValueError):
        ClimateProfile("x", 10.0, 5.0, 20.0, 0.0)
    with pytest.raises(ValueError):
        CITY_PROFILES["curitiba"].with_(clearness=1.5)


def test_csv_roundtrip_is_bit_exact(tmp_path, curitiba):
    path = write_climate_csv(curitiba, tmp_path / "c.csv")
    back = load_climate_csv(path)
    np.testing.assert_array_equal(back.t_out_C, curitiba.t_out_C)
    np.testing.assert_array_equal(back.t_sky_C, curitiba.t_sky_C)
    assert back.start == datetime(2021, 1, 1)
    np.testing.assert_array_equal(back.q_solar["E"], curitiba.q_solar["E"])


def test_missing_sky_column_falls_back_to_offset(tmp_path):
    c = ClimateSeries.constant(5, 12.5, 100.0)
    path = write_climate_csv(c, tmp_path / "c.csv", include_sky=False)
    back = load_climate_csv(path, sky_offset=7.0)
    assert not back.sky_from_file
    np.testing.assert_allclose(back.t_sky_C, 5.5)
    np.testing.assert_allclose(back.t_sky_K, 5.5 + 273.15)


def _write_rows(path, rows, header=None):
    header = header or ("timestamp_iso8601,t_out_C,q_solar_N_Wm2,q_solar_S_Wm2,q_solar_E_Wm2,"
                        "q_solar_W_Wm2,q_solar_H_Wm2")
    path.write_text(header + "\n" + "\n".join(rows) + "\n")
    return path


def test_loader_reports_row_context(tmp_path):
    ok = ["2021-01-01T00:00:00,10,0,0,0,0,0", "2021-01-01T01:00:00,11,0,0,0,0,0"]
    with pytest.raises(ClimateError, match="row 2 is 2 h"):
        load_climate_csv(_write_rows(tmp_path / "gap.csv",
                                     [ok[0], "2021-01-01T02:00:00,11,0,0,0,0,0"]))
    with pytest.raises(ClimateError, match="row 2"):
        load_climate_csv(_write_rows(tmp_path / "bad.csv", [ok[0], "2021-01-01T01:00:00,abc,0,0,0,0,0"]))
    with pytest.raises(ClimateError, match="row 2: negative solar"):
        load_climate_csv(_write_rows(tmp_path / "neg.csv", [ok[0], "2021-01-01T01:00:00,1,0,-5,0,0,0"]))
    with pytest.raises(ClimateError, match="missing columns"):
        load_climate_csv(_write_rows(tmp_path / "cols.csv", ok, header="timestamp_iso8601,t_out_C"))
    with pytest.raises(ClimateError):
        load_climate_csv(tmp_path / "absent.csv")
    assert len(load_climate_csv(_write_rows(tmp_path / "ok.csv", ok))) == 2


def test_series_validation():
    q = {o: np.zeros(3) for o in ORIENTATIONS}
    with pytest.raises(ClimateError):
        ClimateSeries(datetime(2021, 1, 1), np.zeros(3), {**q, "N": np.zeros(2)}, np.zeros(3))
    with pytest.raises(ClimateError):
        ClimateSeries(datetime(2021, 1, 1), [0, np.nan, 0], q, np.zeros(3))
    with pytest.raises(ClimateError):
        ClimateSeries(datetime(2021, 1, 1), np.zeros(3), {o: q[o] for o in "NSEW"}, np.zeros(3))


@given(vals=st.lists(st.floats(-30, 50), min_size=2, max_size=48), t=st.floats(-1e6, 1e6))
def test_signal_is_periodic_and_interpolates(vals, t):
    c = ClimateSeries.constant(len(vals), 0.0)
    f = c.signal(np.array(vals))
    np.testing.assert_allclose(f(c.times), vals)
    assert f(t) == pytest.approx(f(t + c.duration), abs=1e-9)
    assert min(vals) - 1e-12 <= f(t) <= max(vals) + 1e-12
