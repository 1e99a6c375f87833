"""Domain types, problem files, and the bundled Sanikiluaq dataset.

Problem definitions live in a single YAML file whose sections mirror the
technology tables of the underlying study (existing/new diesel, solar,
wind, battery, hydrogen) plus global assumptions, 288-hour profiles, and
named scenarios.  All catalog types are frozen dataclasses and safe to
share between concurrent scenario runs.
"""

from __future__ import annotations

import hashlib
import importlib.resources
import json
from dataclasses import dataclass, field, replace
from typing import Optional

import yaml

from .profiles import Profile288, REP_HOURS

SCHEMA_VERSION = 1

TECH_EXISTING_DIESEL = "existing-diesel"
TECH_NEW_DIESEL = "new-diesel"
TECH_SOLAR = "solar"
TECH_WIND = "wind"
TECH_BATTERY = "battery"
TECH_HYDROGEN = "hydrogen"
ALL_TECHS = (TECH_EXISTING_DIESEL, TECH_NEW_DIESEL, TECH_SOLAR, TECH_WIND,
             TECH_BATTERY, TECH_HYDROGEN)

STANDBY_CHOICES = ("none", "even-years", "odd-years")


class ProblemFormatError(ValueError):
    """Malformed problem file; message carries the offending section/field."""


class InvariantError(ValueError):
    """A structurally valid problem violates a documented invariant."""


@dataclass(frozen=True)
class Finding:
    severity: str  # "error" | "warning"
    field: str
    message: str


@dataclass(frozen=True)
class DieselGenSpec:
    id: str
    rated_kw: float
    lifetime_h: float
    fuel_a: float            # l/h/kW^2
    fuel_b: float            # l/h/kW
    fuel_c: float            # l/h
    min_load_frac: float
    om_cost_per_kwh: float
    capital_cost_per_kw: Optional[float] = None  # new units only
    standby_parity: str = "none"                 # existing units only

    def fuel_at(self, p: float) -> float:
        return self.fuel_a * p * p + self.fuel_b * p + self.fuel_c


@dataclass(frozen=True)
class SolarSpec:
    capital_cost_per_kw: float
    om_cost_per_kwh: float
    temp_coeff_per_c: float  # pu/degC
    derating: float
    lifetime_y: float
    tau_stc_c: float
    g_stc_kw_m2: float


@dataclass(frozen=True)
class WindCurveSegment:
    lo: float         # m/s, inclusive
    hi: float         # m/s, exclusive
    slope: float      # kW per m/s
    intercept: float  # kW


@dataclass(frozen=True)
class WindSpec:
    rated_kw: float
    curve: tuple  # of WindCurveSegment, ordered, covering [0, inf)
    cut_in: float
    nominal: float
    cut_out: float
    capital_cost_per_kw: float
    om_cost_per_kwh: float
    lifetime_y: float


@dataclass(frozen=True)
class BatterySpec:
    module_kwh: float
    peak_kw: float
    capital_cost_per_kwh: float
    om_cost_per_kwh: float
    eta_ch: float
    eta_dch: float
    soc0_frac: float
    dod_frac: float
    t_ch_h: float
    t_dch_h: float
    cycle_life: float


@dataclass(frozen=True)
class HydrogenSpec:
    fc_kw: float
    el_kw: float
    tank_kg: float
    fc_cost_per_unit: float
    el_cost_per_unit: float
    tank_cost_per_unit: float
    fc_om_per_h: float     # $ per operating hour at rated output
    el_om_per_y: float     # $ per unit-year
    tank_om_per_y: float   # $ per unit-year
    eta_fc: float
    eta_el: float
    hhv_kwh_per_kg: float
    compressor_load: float
    tank_max_frac: float
    tank_min_frac: float
    fc_lifetime_h: float
    el_lifetime_y: float
    tank_lifetime_y: float


@dataclass(frozen=True)
class PlanningAssumptions:
    discount_rate: float
    horizon_years: int
    days_per_month: float        # lambda weight
    rep_hours: int
    reserve_load: float          # beta
    reserve_solar: float         # gamma
    reserve_wind: float          # rho
    load_growth: float
    diesel_price_per_l: float
    maintenance_frac: float
    big_m: float
    res_invest_window: tuple     # (first, last) year, inclusive
    diesel_invest_window: tuple
    fuel_segments: int
    emission_factor_kg_per_l: float
    capacity_cap_factor: float = 5.0  # per-tech capacity bound as multiple of peak demand


@dataclass(frozen=True)
class ScenarioDefinition:
    id: str
    allowed_tech: frozenset
    diesel_reserve_only: bool = False
    require_battery: bool = False
    solar_min_share: float = 0.0    # fraction of annual demand energy, 0 = off
    require_hydrogen: bool = False
    mandatory_h2_year1: bool = False
    el_replacement_year: Optional[int] = None


@dataclass(frozen=True)
class TechnologyCatalog:
    diesel_existing: tuple  # of DieselGenSpec
    diesel_new: tuple       # of DieselGenSpec
    solar: Optional[SolarSpec] = None
    wind: Optional[WindSpec] = None
    battery: Optional[BatterySpec] = None
    hydrogen: Optional[HydrogenSpec] = None


@dataclass(frozen=True)
class ProblemProfiles:
    load: Profile288          # kW
    irradiance: Profile288    # kW/m2
    cell_temp: Profile288     # degC
    wind_speed: Profile288    # m/s


@dataclass(frozen=True)
class PlanningProblem:
    name: str
    catalog: TechnologyCatalog
    profiles: ProblemProfiles
    assumptions: PlanningAssumptions
    scenario: ScenarioDefinition
    provenance: str = ""

    def fingerprint(self) -> str:
        """Stable digest of everything except the scenario (shared across runs)."""
        d = problem_to_dict(self)
        d.pop("scenarios", None)
        blob = json.dumps(d, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Parsing helpers

_PCT_FIELDS = {"derating", "eta_ch", "eta_dch", "soc0_frac", "dod_frac",
               "eta_fc", "eta_el", "maintenance_frac", "tank_max_frac",
               "tank_min_frac", "min_load_frac"}


def _normalize_units(mapping: dict) -> dict:
    """Fold '<field>_pct' percent keys into canonical per-unit fields.

    Idempotent: canonical inputs pass through untouched.
    """
    out = {}
    for key, value in mapping.items():
        if key.endswith("_pct") and key[:-4] in _PCT_FIELDS:
            out[key[:-4]] = float(value) / 100.0
        else:
            out[key] = value
    return out


def _build(cls, section: str, mapping, **extra):
    if not isinstance(mapping, dict):
        raise ProblemFormatError(f"{section}: expected a mapping, got {type(mapping).__name__}")
    data = _normalize_units(mapping)
    data.update(extra)
    names = {f.name for f in cls.__dataclass_fields__.values()}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ProblemFormatError(f"{section}: unknown field(s) {', '.join(unknown)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ProblemFormatError(f"{section}: {exc}") from None


def _parse_wind(section: str, mapping: dict) -> WindSpec:
    data = dict(mapping)
    raw_curve = data.pop("curve", None)
    if not raw_curve:
        raise ProblemFormatError(f"{section}.curve: missing power curve")
    segs = []
    for i, row in enumerate(raw_curve):
        if len(row) != 4:
            raise ProblemFormatError(f"{section}.curve[{i}]: need [lo, hi, slope, intercept]")
        segs.append(WindCurveSegment(*(float(v) for v in row)))
    # pad implicit zero-output segments so the curve covers [0, inf)
    full = []
    cursor = 0.0
    for seg in sorted(segs, key=lambda s: s.lo):
        if seg.lo > cursor:
            full.append(WindCurveSegment(cursor, seg.lo, 0.0, 0.0))
        full.append(seg)
        cursor = seg.hi
    full.append(WindCurveSegment(cursor, float("inf"), 0.0, 0.0))
    return _build(WindSpec, section, data, curve=tuple(full))


def _parse_profile(section: str, values, unit: str, provenance: str) -> Profile288:
    if not isinstance(values, list):
        raise ProblemFormatError(f"{section}: expected a list of numbers")
    return Profile288(tuple(float(v) for v in values), unit,
                      name=section, provenance=provenance)


def _parse_scenario(sid: str, mapping: dict) -> ScenarioDefinition:
    data = dict(mapping)
    allowed = data.pop("allowed_tech", None)
    if allowed is None:
        raise ProblemFormatError(f"scenarios.{sid}: missing allowed_tech")
    for tech in allowed:
        if tech not in ALL_TECHS:
            raise ProblemFormatError(f"scenarios.{sid}: unknown technology {tech!r}")
    return _build(ScenarioDefinition, f"scenarios.{sid}", data,
                  id=sid, allowed_tech=frozenset(allowed))


def problem_from_dict(doc: dict, scenario_id: str, name: str = "") -> PlanningProblem:
    """Assemble and validate a PlanningProblem from a parsed document."""
    if not isinstance(doc, dict):
        raise ProblemFormatError("top level: expected a mapping")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ProblemFormatError(f"schema_version: expected {SCHEMA_VERSION}, got {version!r}")
    provenance = str(doc.get("provenance", ""))

    diesel_existing = tuple(
        _build(DieselGenSpec, f"diesel_existing[{i}]", entry)
        for i, entry in enumerate(doc.get("diesel_existing", [])))
    diesel_new = tuple(
        _build(DieselGenSpec, f"diesel_new[{i}]", entry)
        for i, entry in enumerate(doc.get("diesel_new", [])))
    catalog = TechnologyCatalog(
        diesel_existing=diesel_existing,
        diesel_new=diesel_new,
        solar=_build(SolarSpec, "solar", doc["solar"]) if doc.get("solar") else None,
        wind=_parse_wind("wind", doc["wind"]) if doc.get("wind") else None,
        battery=_build(BatterySpec, "battery", doc["battery"]) if doc.get("battery") else None,
        hydrogen=_build(HydrogenSpec, "hydrogen", doc["hydrogen"]) if doc.get("hydrogen") else None,
    )

    raw_as = dict(doc.get("assumptions") or {})
    for window in ("res_invest_window", "diesel_invest_window"):
        if window in raw_as:
            lo, hi = raw_as[window]
            raw_as[window] = (int(lo), int(hi))
    assumptions = _build(PlanningAssumptions, "assumptions", raw_as)

    prof = doc.get("profiles") or {}
    for key in ("load_kw", "irradiance_kw_m2", "cell_temp_c", "wind_speed_m_s"):
        if key not in prof:
            raise ProblemFormatError(f"profiles.{key}: missing")
    profiles = ProblemProfiles(
        load=_parse_profile("profiles.load_kw", prof["load_kw"], "kW", provenance),
        irradiance=_parse_profile("profiles.irradiance_kw_m2", prof["irradiance_kw_m2"],
                                  "kW/m2", provenance),
        cell_temp=_parse_profile("profiles.cell_temp_c", prof["cell_temp_c"],
                                 "degC", provenance),
        wind_speed=_parse_profile("profiles.wind_speed_m_s", prof["wind_speed_m_s"],
                                  "m/s", provenance),
    )

    scenarios = doc.get("scenarios") or {}
    if scenario_id not in scenarios:
        known = ", ".join(sorted(scenarios)) or "none"
        raise ProblemFormatError(f"unknown scenario {scenario_id!r} (defined: {known})")
    scenario = _parse_scenario(scenario_id, scenarios[scenario_id])

    problem = PlanningProblem(name=name or str(doc.get("name", "problem")),
                              catalog=catalog, profiles=profiles,
                              assumptions=assumptions, scenario=scenario,
                              provenance=provenance)
    errors = [f for f in validate_problem(problem) if f.severity == "error"]
    if errors:
        first = errors[0]
        raise InvariantError(f"{first.field}: {first.message}"
                             + (f" (+{len(errors) - 1} more)" if len(errors) > 1 else ""))
    return problem


def load_problem(path, scenario_id: str) -> PlanningProblem:
    """Load and validate a problem file for one named scenario."""
    try:
        with open(path) as f:
            doc = yaml.safe_load(f)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ProblemFormatError(f"{path}: YAML parse error{where}: {exc}") from None
    return problem_from_dict(doc, scenario_id, name=str(path))


def builtin_sanikiluaq(scenario_id: str = "BAU") -> PlanningProblem:
    """The bundled Sanikiluaq reconstruction (profiles digitized, approximate)."""
    ref = importlib.resources.files("microplan.data").joinpath("sanikiluaq.yaml")
    doc = yaml.safe_load(ref.read_text())
    return problem_from_dict(doc, scenario_id, name="sanikiluaq")


# ---------------------------------------------------------------------------
# Validation

def _check(findings, ok, field, message, severity="error"):
    if not ok:
        findings.append(Finding(severity, field, message))


def validate_problem(problem: PlanningProblem) -> list:
    """All type invariants and cross-field checks; empty list means clean."""
    f: list = []
    cat, a = problem.catalog, problem.assumptions

    for group, specs in (("diesel_existing", cat.diesel_existing),
                         ("diesel_new", cat.diesel_new)):
        for spec in specs:
            tag = f"{group}.{spec.id}"
            _check(f, spec.rated_kw > 0, f"{tag}.rated_kw", "must be > 0")
            _check(f, 0 <= spec.min_load_frac < 1, f"{tag}.min_load_frac",
                   "must be in [0, 1)")
            _check(f, spec.lifetime_h > 0, f"{tag}.lifetime_h", "must be > 0")
            _check(f, spec.standby_parity in STANDBY_CHOICES, f"{tag}.standby_parity",
                   f"must be one of {STANDBY_CHOICES}")
            pmin = spec.min_load_frac * spec.rated_kw
            _check(f, spec.fuel_at(pmin) >= 0, f"{tag}.fuel_c",
                   f"fuel rate at minimum load {pmin:g} kW is negative")
            if group == "diesel_new":
                _check(f, spec.capital_cost_per_kw is not None,
                       f"{tag}.capital_cost_per_kw", "required for new units")
                _check(f, spec.standby_parity == "none", f"{tag}.standby_parity",
                       "standby parity applies to existing units only")
    ids = [s.id for s in cat.diesel_existing + cat.diesel_new]
    _check(f, len(ids) == len(set(ids)), "diesel", "duplicate generator ids")

    if cat.solar:
        s = cat.solar
        _check(f, 0 < s.derating <= 1, "solar.derating", "must be in (0, 1]")
        _check(f, s.g_stc_kw_m2 > 0, "solar.g_stc_kw_m2", "must be > 0")
        _check(f, s.lifetime_y > 0, "solar.lifetime_y", "must be > 0")
    if cat.wind:
        w = cat.wind
        cursor = 0.0
        for i, seg in enumerate(w.curve):
            _check(f, abs(seg.lo - cursor) < 1e-9, f"wind.curve[{i}]",
                   "segments must be contiguous from 0")
            cursor = seg.hi
        _check(f, cursor == float("inf"), "wind.curve", "segments must cover [0, inf)")
        for i, seg in enumerate(w.curve):
            if seg.hi <= w.cut_in or seg.lo >= w.cut_out:
                for s_eval in (seg.lo, min(seg.hi, 1e3)):
                    _check(f, abs(seg.slope * s_eval + seg.intercept) < 1e-9
                           or seg.slope == 0 and seg.intercept == 0,
                           f"wind.curve[{i}]", "output must be 0 outside [cut_in, cut_out)")
            else:
                hi = min(seg.hi, w.cut_out)
                for s_eval in (seg.lo, hi - 1e-9):
                    val = seg.slope * s_eval + seg.intercept
                    _check(f, val <= w.rated_kw + 1e-6, f"wind.curve[{i}]",
                           f"output {val:g} kW exceeds rated {w.rated_kw:g} kW")
                    _check(f, val >= -1e-9, f"wind.curve[{i}]", "output must be >= 0")
    if cat.battery:
        b = cat.battery
        _check(f, 0 < b.eta_ch <= 1, "battery.eta_ch", "must be in (0, 1]")
        _check(f, 0 < b.eta_dch <= 1, "battery.eta_dch", "must be in (0, 1]")
        _check(f, 0 <= b.dod_frac < 1, "battery.dod_frac", "must be in [0, 1)")
        _check(f, 0 <= b.soc0_frac <= 1, "battery.soc0_frac", "must be in [0, 1]")
        _check(f, b.t_ch_h > 0 and b.t_dch_h > 0, "battery.t_ch_h", "must be > 0")
        _check(f, b.cycle_life > 0, "battery.cycle_life", "must be > 0")
        implied = (1.0 - b.dod_frac) / b.t_ch_h * b.module_kwh
        _check(f, abs(implied - b.peak_kw) <= 1e-9, "battery.peak_kw",
               f"(1-dod)/t_ch * module_kwh = {implied!r} != peak_kw {b.peak_kw!r}")
        _check(f, b.soc0_frac >= b.dod_frac, "battery.soc0_frac",
               "initial state below depth-of-discharge floor", severity="warning")
    if cat.hydrogen:
        h = cat.hydrogen
        _check(f, 0 < h.tank_min_frac < h.tank_max_frac <= 1, "hydrogen.tank_min_frac",
               "need 0 < tank_min_frac < tank_max_frac <= 1")
        _check(f, 0 < h.eta_fc <= 1, "hydrogen.eta_fc", "must be in (0, 1]")
        _check(f, 0 < h.eta_el <= 1, "hydrogen.eta_el", "must be in (0, 1]")
        _check(f, h.hhv_kwh_per_kg > 0, "hydrogen.hhv_kwh_per_kg", "must be > 0")
        _check(f, h.compressor_load >= 0, "hydrogen.compressor_load", "must be >= 0")

    _check(f, a.horizon_years >= 1, "assumptions.horizon_years", "must be >= 1")
    _check(f, a.rep_hours >= 1, "assumptions.rep_hours", "must be >= 1")
    _check(f, a.rep_hours == REP_HOURS, "assumptions.rep_hours",
           f"standard representative year has {REP_HOURS} hours, got {a.rep_hours}",
           severity="warning")
    for name in ("discount_rate", "reserve_load", "reserve_solar", "reserve_wind",
                 "load_growth", "maintenance_frac"):
        val = getattr(a, name)
        _check(f, 0 <= val < 1, f"assumptions.{name}", "must be in [0, 1)")
    _check(f, a.diesel_price_per_l >= 0, "assumptions.diesel_price_per_l", "must be >= 0")
    _check(f, a.fuel_segments >= 1, "assumptions.fuel_segments", "must be >= 1")
    _check(f, a.emission_factor_kg_per_l >= 0, "assumptions.emission_factor_kg_per_l",
           "must be >= 0")
    _check(f, a.capacity_cap_factor > 0, "assumptions.capacity_cap_factor", "must be > 0")
    for window in ("res_invest_window", "diesel_invest_window"):
        lo, hi = getattr(a, window)
        _check(f, 1 <= lo <= hi, f"assumptions.{window}", "need 1 <= first <= last")
    bound = _peak_power_bound(problem)
    _check(f, a.big_m >= bound, "assumptions.big_m",
           f"big_m {a.big_m:g} below the largest single-hour power bound {bound:g} kW",
           severity="warning")

    p = problem.profiles
    for tag, prof in (("load_kw", p.load), ("irradiance_kw_m2", p.irradiance),
                      ("cell_temp_c", p.cell_temp), ("wind_speed_m_s", p.wind_speed)):
        _check(f, len(prof) == a.rep_hours, f"profiles.{tag}",
               f"length {len(prof)} != rep_hours {a.rep_hours}")
    _check(f, all(v > 0 for v in p.load.values), "profiles.load_kw",
           "load must be strictly positive")
    _check(f, all(v >= 0 for v in p.irradiance.values), "profiles.irradiance_kw_m2",
           "irradiance must be >= 0")
    _check(f, all(v >= 0 for v in p.wind_speed.values), "profiles.wind_speed_m_s",
           "wind speed must be >= 0")

    sc = problem.scenario
    if sc.id == "BAU":
        _check(f, sc.allowed_tech <= {TECH_EXISTING_DIESEL, TECH_NEW_DIESEL},
               "scenario.allowed_tech", "BAU must be diesel-only")
        _check(f, not (sc.require_battery or sc.require_hydrogen or sc.solar_min_share),
               "scenario", "BAU must have all minimum-inclusion flags off")
    if sc.diesel_reserve_only:
        _check(f, TECH_EXISTING_DIESEL in sc.allowed_tech, "scenario.allowed_tech",
               "reserve-only dispatch still needs existing diesel in the catalog scope")
    for tech, present in ((TECH_SOLAR, cat.solar), (TECH_WIND, cat.wind),
                          (TECH_BATTERY, cat.battery), (TECH_HYDROGEN, cat.hydrogen)):
        if tech in sc.allowed_tech:
            _check(f, present is not None, "scenario.allowed_tech",
                   f"scenario allows {tech} but the catalog has no {tech} section")
    if TECH_EXISTING_DIESEL in sc.allowed_tech:
        _check(f, len(cat.diesel_existing) > 0, "scenario.allowed_tech",
               "scenario allows existing-diesel but none are defined")
    if TECH_NEW_DIESEL in sc.allowed_tech:
        _check(f, len(cat.diesel_new) > 0, "scenario.allowed_tech",
               "scenario allows new-diesel but none are defined")
    return f


def _peak_power_bound(problem: PlanningProblem) -> float:
    """Largest single-hour power bound appearing anywhere in the model."""
    cat, a = problem.catalog, problem.assumptions
    peak_load = max(problem.profiles.load.values) * (1 + a.load_growth) ** (a.horizon_years - 1)
    bound = peak_load * (1 + a.reserve_load)
    for spec in cat.diesel_existing + cat.diesel_new:
        bound = max(bound, spec.rated_kw)
    cap = a.capacity_cap_factor * peak_load
    for unit_kw in ((cat.wind.rated_kw if cat.wind else 0),
                    (cat.hydrogen.fc_kw if cat.hydrogen else 0),
                    (cat.hydrogen.el_kw if cat.hydrogen else 0)):
        if unit_kw:
            bound = max(bound, unit_kw)
    if cat.solar or cat.wind:
        bound = max(bound, cap)
    return bound


# ---------------------------------------------------------------------------
# Serialization (round-trips through problem_from_dict)

def _spec_dict(spec) -> dict:
    out = {}
    for name, value in spec.__dict__.items():
        if value is None:
            continue
        out[name] = value
    return out


def problem_to_dict(problem: PlanningProblem) -> dict:
    cat = problem.catalog
    doc = {
        "schema_version": SCHEMA_VERSION,
        "name": problem.name,
        "provenance": problem.provenance,
        "diesel_existing": [_spec_dict(s) for s in cat.diesel_existing],
        "diesel_new": [_spec_dict(s) for s in cat.diesel_new],
        "assumptions": {
            **{k: (list(v) if isinstance(v, tuple) else v)
               for k, v in problem.assumptions.__dict__.items()},
        },
        "profiles": {
            "load_kw": list(problem.profiles.load.values),
            "irradiance_kw_m2": list(problem.profiles.irradiance.values),
            "cell_temp_c": list(problem.profiles.cell_temp.values),
            "wind_speed_m_s": list(problem.profiles.wind_speed.values),
        },
        "scenarios": {
            problem.scenario.id: {
                "allowed_tech": sorted(problem.scenario.allowed_tech),
                "diesel_reserve_only": problem.scenario.diesel_reserve_only,
                "require_battery": problem.scenario.require_battery,
                "solar_min_share": problem.scenario.solar_min_share,
                "require_hydrogen": problem.scenario.require_hydrogen,
                "mandatory_h2_year1": problem.scenario.mandatory_h2_year1,
                **({"el_replacement_year": problem.scenario.el_replacement_year}
                   if problem.scenario.el_replacement_year is not None else {}),
            },
        },
    }
    if cat.solar:
        doc["solar"] = _spec_dict(cat.solar)
    if cat.wind:
        w = _spec_dict(cat.wind)
        w["curve"] = [[s.lo, s.hi, s.slope, s.intercept] for s in cat.wind.curve
                      if not (s.slope == 0 and s.intercept == 0)]
        doc["wind"] = w
    if cat.battery:
        doc["battery"] = _spec_dict(cat.battery)
    if cat.hydrogen:
        doc["hydrogen"] = _spec_dict(cat.hydrogen)
    return doc


def serialize_problem(problem: PlanningProblem) -> str:
    return yaml.safe_dump(problem_to_dict(problem), sort_keys=False)


def save_problem(problem: PlanningProblem, path) -> None:
    with open(path, "w") as f:
        f.write(serialize_problem(problem))


# ---------------------------------------------------------------------------
# Problem reductions for smoke runs and desk-scale studies

def reduce_problem(problem: PlanningProblem, years: Optional[int] = None,
                   hours: Optional[int] = None) -> PlanningProblem:
    """Shrink horizon and/or representative hours.

    When ``hours`` divides into 12 equal per-month picks, hour-of-day samples
    are taken evenly within each month so seasonal and diurnal structure
    survives; otherwise the first ``hours`` entries are kept.
    """
    a = problem.assumptions
    new_years = a.horizon_years if years is None else int(years)
    new_hours = a.rep_hours if hours is None else int(hours)
    if new_years < 1 or new_hours < 1:
        raise InvariantError("years and hours must be >= 1")
    if new_hours > a.rep_hours:
        raise InvariantError(f"cannot expand rep_hours beyond {a.rep_hours}")

    if new_hours == a.rep_hours:
        idx = list(range(a.rep_hours))
    elif a.rep_hours == REP_HOURS and new_hours % 12 == 0:
        per_month = new_hours // 12
        idx = []
        for m in range(12):
            for j in range(per_month):
                hod = int((j + 0.5) * 24 / per_month)
                idx.append(24 * m + hod)
    else:
        idx = list(range(new_hours))

    def cut(prof: Profile288) -> Profile288:
        return Profile288(tuple(prof.values[i] for i in idx), prof.unit,
                          name=prof.name, provenance=prof.provenance)

    def clip_window(window):
        lo, hi = window
        return (min(lo, new_years), min(hi, new_years))

    assumptions = replace(a, horizon_years=new_years, rep_hours=new_hours,
                          res_invest_window=clip_window(a.res_invest_window),
                          diesel_invest_window=clip_window(a.diesel_invest_window))
    profiles = ProblemProfiles(load=cut(problem.profiles.load),
                               irradiance=cut(problem.profiles.irradiance),
                               cell_temp=cut(problem.profiles.cell_temp),
                               wind_speed=cut(problem.profiles.wind_speed))
    return replace(problem, assumptions=assumptions, profiles=profiles)
