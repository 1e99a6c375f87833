from datetime import datetime, timedelta

import numpy as np
import pytest

from microplan.catalog import builtin_sanikiluaq
from microplan.profiles import (
    Profile288,
    ProfileError,
    fuel_rate,
    grow_load,
    linearize_fuel_curve,
    read_profiles_csv,
    representative_year,
    solar_unit_output,
    wind_unit_output,
    write_profiles_csv,
)


@pytest.fixture(scope="module")
def cat():
    return builtin_sanikiluaq("BAU").catalog


def _hourly_year(value_fn):
    t = datetime(2020, 1, 1)
    out = []
    while t.year == 2020:
        out.append((t, value_fn(t)))
        t += timedelta(hours=1)
    return out


def test_representative_year_constant():
    prof = representative_year(_hourly_year(lambda t: 7.25), "kW")
    assert len(prof) == 288
    assert all(v == 7.25 for v in prof.values)


def test_representative_year_mean():
    # January hour 0 alternates 10 and 20 by day parity; its bucket mean is 15
    def fn(t):
        if t.month == 1 and t.hour == 0:
            return 10.0 if t.day % 2 else 20.0
        return 5.0
    prof = representative_year(_hourly_year(fn), "kW")
    # January has 31 days: 16 odd days at 10, 15 even days at 20
    expect = (16 * 10 + 15 * 20) / 31
    assert prof.at(1, 1) == pytest.approx(expect, abs=1e-12)
    assert prof.at(2, 1) == 5.0


def test_representative_year_missing_month():
    samples = [(datetime(2020, 1, 1, h), 1.0) for h in range(24)]
    with pytest.raises(ProfileError, match="months"):
        representative_year(samples, "kW")


def test_profile_indexing_convention():
    values = list(range(288))
    prof = Profile288(tuple(float(v) for v in values), "kW")
    assert prof.at(1, 1) == 0
    assert prof.at(1, 24) == 23
    assert prof.at(12, 24) == 287
    assert prof.at(3, 5) == 24 * 2 + 4


def test_grow_load():
    base = Profile288((100.0,) * 288, "kW")
    assert grow_load(base, 0.01, 1).values[0] == 100.0
    assert grow_load(base, 0.01, 2).values[0] == pytest.approx(101.0, abs=1e-9)
    assert grow_load(base, 0.01, 20).values[0] == pytest.approx(
        100.0 * 1.01 ** 19, abs=1e-9)
    assert 120.810 < grow_load(base, 0.01, 20).values[0] < 120.812
    with pytest.raises(ProfileError):
        grow_load(base, 0.01, 0)


def test_solar_unit_output(cat):
    s = cat.solar
    assert solar_unit_output(1.0, 25.0, s) == pytest.approx(0.98, abs=1e-12)
    assert solar_unit_output(0.0, -10.0, s) == 0.0
    assert solar_unit_output(0.5, 0.0, s) == pytest.approx(0.99225, abs=1e-9)
    # clamped at zero once the temperature correction goes negative
    assert solar_unit_output(1.0, 60.0, s) == 0.0


def test_solar_linearity_in_irradiance(cat):
    s = cat.solar
    rng = np.random.default_rng(3)
    for tau in (-30.0, 0.0, 20.0):
        g1, g2 = rng.uniform(0.05, 1.0, 2)
        f1 = solar_unit_output(g1, tau, s)
        f2 = solar_unit_output(g2, tau, s)
        if f1 > 0 and f2 > 0:
            assert f1 / g1 == pytest.approx(f2 / g2, rel=1e-12)


def test_wind_unit_output(cat):
    w = cat.wind
    assert wind_unit_output(2.0, w) == 0.0
    assert wind_unit_output(4.0, w) == pytest.approx(45.0, abs=1e-12)
    assert wind_unit_output(10.0, w) == pytest.approx(250.0, abs=1e-12)
    assert wind_unit_output(25.0, w) == 0.0
    assert wind_unit_output(30.0, w) == 0.0
    # the published jump at the nominal speed is preserved
    assert wind_unit_output(7.499999, w) == pytest.approx(162.5, abs=1e-4)
    assert wind_unit_output(7.5, w) == 250.0


def test_wind_monotone_below_nominal_and_bounded(cat):
    w = cat.wind
    speeds = np.linspace(w.cut_in, w.nominal, 200)
    vals = [wind_unit_output(float(s), w) for s in speeds]
    assert all(b >= a - 1e-9 for a, b in zip(vals, vals[1:]))
    for s in np.linspace(0, 40, 400):
        assert 0 <= wind_unit_output(float(s), w) <= w.rated_kw + 1e-9


def test_fuel_rate_spot_values(cat):
    g5 = cat.diesel_existing[4]
    g1 = cat.diesel_existing[0]
    assert fuel_rate(g5, 500.0, True) == pytest.approx(123.05, abs=1e-9)
    assert fuel_rate(g1, 330.0, True) == pytest.approx(91.656, abs=1e-9)
    assert fuel_rate(g5, 0.0, False) == 0.0
    with pytest.raises(ProfileError):
        fuel_rate(g5, 100.0, True)     # below minimum load
    with pytest.raises(ProfileError):
        fuel_rate(g5, 100.0, False)    # off generators carry no load


def test_single_segment_chord(cat):
    g5 = cat.diesel_existing[4]
    curve = linearize_fuel_curve(g5, 1)
    assert curve.breakpoints == (200.0, 500.0)
    # endpoint evaluation of the published quadratic: f(200)=53.6, f(500)=123.05
    assert curve.value(200.0) == pytest.approx(53.6, abs=1e-9)
    assert curve.value(500.0) == pytest.approx(123.05, abs=1e-9)
    assert curve.convex


def test_breakpoints_exact_for_all_units(cat):
    for spec in cat.diesel_existing + cat.diesel_new:
        for k in (1, 2, 3, 5):
            curve = linearize_fuel_curve(spec, k)
            assert curve.convex == (spec.fuel_a >= 0)
            for bp in curve.breakpoints:
                assert curve.value(bp) == pytest.approx(
                    fuel_rate(spec, bp, True), abs=1e-9)


def test_three_segment_midpoint_error(cat):
    g5 = cat.diesel_existing[4]
    curve = linearize_fuel_curve(g5, 3)
    rated_rate = fuel_rate(g5, g5.rated_kw, True)
    for k in range(3):
        mid = 0.5 * (curve.breakpoints[k] + curve.breakpoints[k + 1])
        err = abs(curve.value(mid) - fuel_rate(g5, mid, True))
        assert err <= 0.002 * rated_rate


def test_chord_side_of_quadratic(cat):
    # convex curves are over-approximated by chords, concave under-approximated
    for spec in cat.diesel_existing + cat.diesel_new:
        curve = linearize_fuel_curve(spec, 4)
        for k in range(curve.segments):
            lo, hi = curve.breakpoints[k], curve.breakpoints[k + 1]
            for frac in (0.25, 0.5, 0.75):
                p = lo + frac * (hi - lo)
                diff = curve.value(p) - fuel_rate(spec, p, True)
                if spec.fuel_a >= 0:
                    assert diff >= -1e-9
                else:
                    assert diff <= 1e-9


def test_profiles_csv_round_trip(tmp_path):
    rng = np.random.default_rng(11)
    vals = tuple(float(v) for v in rng.uniform(0, 700, 288))
    path = tmp_path / "prof.csv"
    write_profiles_csv(path, [("load", "kW", vals)], meta={"provenance": "test"})
    cols, meta = read_profiles_csv(path)
    assert meta["provenance"] == "test"
    (name, unit, got), = cols
    assert (name, unit) == ("load", "kW")
    assert got == vals  # bit-for-bit
