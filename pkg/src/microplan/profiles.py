"""Time-series preprocessing for the representative 288-hour year.

A representative year has one averaged 24-hour day per month, indexed
h = 24*(month-1) + hour_of_day with both month and hour_of_day 1-based.
This module also hosts the weather-to-power conversions and the diesel
fuel-rate curves with their piecewise linearization.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Sequence

if TYPE_CHECKING:  # pragma: no cover
    from .catalog import DieselGenSpec, SolarSpec, WindSpec

REP_HOURS = 288  # 24 hours x 12 months

PROFILE_UNITS = ("kW", "kW/m2", "degC", "m/s")


class ProfileError(ValueError):
    """Raised for malformed or incomplete time series."""


@dataclass(frozen=True)
class Profile288:
    """Ordered representative-year series with a fixed unit tag.

    ``values`` may be shorter than 288 for deliberately reduced problems
    (smoke runs, oracle instances); the canonical length is 288.
    """

    values: tuple
    unit: str
    name: str = ""
    provenance: str = ""

    def __post_init__(self):
        if self.unit not in PROFILE_UNITS:
            raise ProfileError(f"unknown profile unit {self.unit!r}")
        if len(self.values) == 0:
            raise ProfileError(f"profile {self.name!r} is empty")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    def __len__(self):
        return len(self.values)

    def at(self, month: int, hour_of_day: int) -> float:
        """Value at 1-based (month, hour-of-day); requires the full 288 layout."""
        if len(self.values) != REP_HOURS:
            raise ProfileError("month/hour addressing needs a 288-entry profile")
        if not (1 <= month <= 12 and 1 <= hour_of_day <= 24):
            raise ProfileError(f"month {month}, hour {hour_of_day} out of range")
        return self.values[24 * (month - 1) + (hour_of_day - 1)]


def representative_year(raw: Iterable[tuple], unit: str, name: str = "",
                        provenance: str = "") -> Profile288:
    """Average an hourly timestamped series into the 288-hour year.

    ``raw`` yields (timestamp, value) pairs where timestamp has .month
    (1-12) and .hour (0-23) attributes; entry (m, d) of the result is the
    mean of all samples falling in month m at hour-of-day d.
    """
    sums = [[0.0] * 24 for _ in range(12)]
    counts = [[0] * 24 for _ in range(12)]
    for ts, value in raw:
        sums[ts.month - 1][ts.hour] += float(value)
        counts[ts.month - 1][ts.hour] += 1
    missing_months = [m + 1 for m in range(12) if not any(counts[m])]
    if missing_months:
        raise ProfileError(f"no samples for months {missing_months}")
    values = []
    for m in range(12):
        for d in range(24):
            if counts[m][d] == 0:
                raise ProfileError(f"no samples for month {m + 1}, hour {d}")
            values.append(sums[m][d] / counts[m][d])
    return Profile288(tuple(values), unit, name=name, provenance=provenance)


def grow_load(base: Profile288, growth: float, year: int) -> Profile288:
    """Scale a load profile by (1+growth)^(year-1); year is 1-based."""
    if year < 1:
        raise ProfileError(f"year must be >= 1, got {year}")
    factor = (1.0 + growth) ** (year - 1)
    return Profile288(tuple(v * factor for v in base.values), base.unit,
                      name=base.name, provenance=base.provenance)


def solar_unit_output(g: float, tau: float, spec: "SolarSpec") -> float:
    """Per-unit plant output (kW per kW installed) from irradiance and cell temperature."""
    if g < 0:
        raise ProfileError(f"negative irradiance {g}")
    factor = spec.derating * (g / spec.g_stc_kw_m2) * (
        1.0 + spec.temp_coeff_per_c * (tau - spec.tau_stc_c))
    return max(0.0, factor)


def wind_unit_output(s: float, spec: "WindSpec") -> float:
    """Power (kW) of a single turbine at wind speed s, from its tabulated curve."""
    if s < 0:
        raise ProfileError(f"negative wind speed {s}")
    for seg in spec.curve:
        if seg.lo <= s < seg.hi:
            return seg.slope * s + seg.intercept
    return 0.0


def fuel_rate(spec: "DieselGenSpec", p: float, on: bool) -> float:
    """Fuel flow (l/h) of one generator at power p; quadratic a*p^2 + b*p + c when on."""
    if not on:
        if p != 0.0:
            raise ProfileError(f"power {p} kW with generator {spec.id} off")
        return 0.0
    lo = spec.min_load_frac * spec.rated_kw
    if not (lo - 1e-9 <= p <= spec.rated_kw + 1e-9):
        raise ProfileError(
            f"power {p} kW outside [{lo}, {spec.rated_kw}] for generator {spec.id}")
    return spec.fuel_a * p * p + spec.fuel_b * p + spec.fuel_c


@dataclass(frozen=True)
class PiecewiseCurve:
    """Chord linearization of a quadratic fuel curve on [psi*R, R].

    Segment k covers [breakpoints[k], breakpoints[k+1]] with rate
    slopes[k] * p + intercepts[k]; the chords agree with the quadratic at
    every breakpoint.  ``convex`` records the sign of the quadratic term.
    """

    breakpoints: tuple
    slopes: tuple
    intercepts: tuple
    convex: bool

    @property
    def segments(self) -> int:
        return len(self.slopes)

    def value(self, p: float) -> float:
        """Piecewise value at p inside the curve domain."""
        bp = self.breakpoints
        if not (bp[0] - 1e-9 <= p <= bp[-1] + 1e-9):
            raise ProfileError(f"power {p} outside curve domain [{bp[0]}, {bp[-1]}]")
        for k in range(self.segments):
            if p <= bp[k + 1] or k == self.segments - 1:
                return self.slopes[k] * p + self.intercepts[k]
        raise AssertionError("unreachable")

    def segment_of(self, p: float) -> int:
        """Index of the segment containing p (lowest on breakpoint ties)."""
        bp = self.breakpoints
        if not (bp[0] - 1e-9 <= p <= bp[-1] + 1e-9):
            raise ProfileError(f"power {p} outside curve domain [{bp[0]}, {bp[-1]}]")
        for k in range(self.segments):
            if p <= bp[k + 1]:
                return k
        return self.segments - 1


def linearize_fuel_curve(spec: "DieselGenSpec", segments: int) -> PiecewiseCurve:
    """Chord linearization of the generator's quadratic on [psi*R, R]."""
    if segments < 1:
        raise ProfileError(f"segments must be >= 1, got {segments}")
    lo = spec.min_load_frac * spec.rated_kw
    hi = spec.rated_kw
    bp = tuple(lo + (hi - lo) * k / segments for k in range(segments + 1))
    slopes, intercepts = [], []
    for k in range(segments):
        p0, p1 = bp[k], bp[k + 1]
        f0 = fuel_rate(spec, p0, True)
        f1 = fuel_rate(spec, p1, True)
        s = (f1 - f0) / (p1 - p0)
        slopes.append(s)
        intercepts.append(f0 - s * p0)
    return PiecewiseCurve(bp, tuple(slopes), tuple(intercepts), convex=spec.fuel_a >= 0)


# ---------------------------------------------------------------------------
# CSV import/export with a unit-tag header row

def write_profiles_csv(path, columns: Sequence[tuple], meta: dict | None = None) -> None:
    """Write aligned series as CSV: '# key: value' comments, then 'name [unit]' headers.

    ``columns`` is a sequence of (name, unit, values); all series must share
    one length.  Floats are written with repr so a re-read is bit-exact.
    """
    lengths = {len(vals) for _, _, vals in columns}
    if len(lengths) != 1:
        raise ProfileError(f"column lengths differ: {sorted(lengths)}")
    with open(path, "w", newline="") as f:
        for key in sorted(meta or {}):
            f.write(f"# {key}: {(meta or {})[key]}\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow([f"{name} [{unit}]" for name, unit, _ in columns])
        n = lengths.pop()
        for i in range(n):
            writer.writerow([repr(float(vals[i])) for _, _, vals in columns])


def read_profiles_csv(path) -> tuple:
    """Inverse of write_profiles_csv: returns ([(name, unit, values)], meta)."""
    meta = {}
    rows = []
    with open(path, newline="") as f:
        header = None
        for line in f:
            if line.startswith("#"):
                key, _, value = line[1:].partition(":")
                meta[key.strip()] = value.strip()
                continue
            if header is None:
                header = next(csv.reader([line]))
                continue
            rows.append(next(csv.reader([line])))
    if header is None:
        raise ProfileError(f"{path}: no header row")
    columns = []
    for j, label in enumerate(header):
        name, _, unit = label.rpartition(" [")
        if not name or not unit.endswith("]"):
            raise ProfileError(f"{path}: header {label!r} lacks a ' [unit]' tag")
        values = tuple(float(row[j]) for row in rows)
        columns.append((name, unit[:-1], values))
    return columns, meta
