"""Compiles a planning problem into a solver-agnostic sparse MILP.

Every constraint row carries a label whose leading tag names the source
relation (Eq2..Eq31 for the core formulation, Fuel* for the fuel-curve
linearization, Init* for storage initial conditions, Scen* for scenario
restrictions).  The label taxonomy is part of the public contract: labels
appear in exported MPS/LP files and in feasibility reports.

Construction notes:
  * Diesel upper/lower dispatch limits for new units contain the product
    of installed capacity and the on/off binary; the product is linearized
    exactly with the capacity's upper bound (rows Eq6/Eq8).
  * Fuel flow is tied to dispatched power through chords of the quadratic
    fuel curve: convex curves (a >= 0) use epigraph inequalities, concave
    curves select the active chord with one binary per segment.  With a
    single segment both collapse to one equality.
  * For aggregated new-diesel capacity beyond one unit the last chord is
    extended linearly, i.e. marginal fuel rate stays constant past rated
    power of a single unit.
  * Every year-y cost term is discounted by 1/(1+r)^(y-1); the capital
    coefficient is the discounted per-capacity unit cost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .catalog import (
    TECH_BATTERY,
    TECH_EXISTING_DIESEL,
    TECH_HYDROGEN,
    TECH_NEW_DIESEL,
    TECH_SOLAR,
    TECH_WIND,
    InvariantError,
    PlanningProblem,
    ScenarioDefinition,
    validate_problem,
)
from .profiles import linearize_fuel_curve, solar_unit_output, wind_unit_output

CONTINUOUS = "C"
INTEGER = "I"
BINARY = "B"

# Core-formulation tags expected to appear in built models (Eq22, the
# charge/discharge complementarity, is realized by its linear substitutes
# Eq23-Eq25 and owns no row of its own).
EQUATION_TAGS = tuple(f"Eq{k}" for k in range(2, 32) if k != 22)

UNIT_TECH = {"s": TECH_SOLAR, "w": TECH_WIND, "b": TECH_BATTERY,
             "f": TECH_HYDROGEN, "el": TECH_HYDROGEN, "q": TECH_HYDROGEN}


class ModelError(ValueError):
    """Inconsistent model construction or misuse of a built instance."""


class VariableIndex:
    """Bijection between matrix columns and (family, unit, year, hour) keys.

    ``hour`` is None for horizon-level variables; segment-indexed fuel
    auxiliaries encode the segment in the unit id as '<unit>#k<seg>'.
    """

    def __init__(self):
        self._by_key: dict = {}
        self._by_col: list = []

    def add(self, family: str, unit: str, year: int, hour: Optional[int]) -> int:
        key = (family, unit, year, hour)
        if key in self._by_key:
            raise ModelError(f"duplicate variable {key}")
        col = len(self._by_col)
        self._by_key[key] = col
        self._by_col.append(key)
        return col

    def col(self, family: str, unit: str, year: int, hour: Optional[int] = None) -> int:
        return self._by_key[(family, unit, year, hour)]

    def has(self, family: str, unit: str, year: int, hour: Optional[int] = None) -> bool:
        return (family, unit, year, hour) in self._by_key

    def key(self, col: int) -> tuple:
        return self._by_col[col]

    def name(self, col: int) -> str:
        family, unit, year, hour = self._by_col[col]
        parts = [family, unit.replace("#", ""), f"y{year}"]
        if hour is not None:
            parts.append(f"h{hour}")
        return "_".join(parts)

    def columns(self, family: Optional[str] = None, unit: Optional[str] = None):
        """Yield (col, key) in column order, optionally filtered."""
        for col, key in enumerate(self._by_col):
            if family is not None and key[0] != family:
                continue
            if unit is not None and key[1] != unit:
                continue
            yield col, key

    def __len__(self):
        return len(self._by_col)


class MilpInstance:
    """Sparse minimization MILP: triplets, row senses/rhs, bounds, var kinds."""

    def __init__(self, name: str = "microplan"):
        self.name = name
        self.col_names: list = []
        self.col_lb: list = []
        self.col_ub: list = []
        self.vartype: list = []
        self.obj: list = []
        self.obj_offset: float = 0.0
        self.row_labels: list = []
        self.row_sense: list = []   # 'L' | 'E' | 'G'
        self.row_rhs: list = []
        self._entries: list = []    # per-row list of (col, coeff)
        self.meta: dict = {}

    # -- construction -------------------------------------------------
    def add_col(self, name: str, lb: float, ub: float, kind: str = CONTINUOUS,
                obj: float = 0.0) -> int:
        if kind not in (CONTINUOUS, INTEGER, BINARY):
            raise ModelError(f"bad variable kind {kind!r}")
        if kind != CONTINUOUS and not (math.isfinite(lb) and math.isfinite(ub)):
            raise ModelError(f"integer column {name} needs finite bounds")
        self.col_names.append(name)
        self.col_lb.append(float(lb))
        self.col_ub.append(float(ub))
        self.vartype.append(kind)
        self.obj.append(float(obj))
        return len(self.col_names) - 1

    def add_row(self, label: str, sense: str, rhs: float, coeffs) -> int:
        if sense not in ("L", "E", "G"):
            raise ModelError(f"bad row sense {sense!r}")
        merged: dict = {}
        for col, val in coeffs:
            if not (0 <= col < len(self.col_names)):
                raise ModelError(f"row {label}: column {col} not allocated")
            if val != 0.0:
                merged[col] = merged.get(col, 0.0) + float(val)
        self.row_labels.append(label)
        self.row_sense.append(sense)
        self.row_rhs.append(float(rhs))
        self._entries.append(sorted(merged.items()))
        return len(self.row_labels) - 1

    def add_obj(self, col: int, coeff: float) -> None:
        self.obj[col] += float(coeff)

    def fix_col(self, col: int, value: float) -> None:
        self.col_lb[col] = float(value)
        self.col_ub[col] = float(value)

    # -- inspection ---------------------------------------------------
    @property
    def n_cols(self) -> int:
        return len(self.col_names)

    @property
    def n_rows(self) -> int:
        return len(self.row_labels)

    def triplets(self):
        """Deterministic (row, col, coeff) stream."""
        for r, entries in enumerate(self._entries):
            for c, v in entries:
                yield (r, c, v)

    def row_entries(self, r: int):
        return self._entries[r]

    def matrix(self):
        import scipy.sparse as sp
        rows, cols, vals = [], [], []
        for r, c, v in self.triplets():
            rows.append(r)
            cols.append(c)
            vals.append(v)
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.n_rows, self.n_cols))

    def arrays(self):
        """(c, lb, ub, vartype, sense, rhs) as numpy arrays."""
        return (np.asarray(self.obj, dtype=float),
                np.asarray(self.col_lb, dtype=float),
                np.asarray(self.col_ub, dtype=float),
                np.asarray(self.vartype, dtype="<U1"),
                np.asarray(self.row_sense, dtype="<U1"),
                np.asarray(self.row_rhs, dtype=float))

    def row_activity(self, r: int, x: np.ndarray) -> float:
        return float(sum(v * x[c] for c, v in self._entries[r]))


@dataclass
class PlanSolution:
    """Structured plan: additions, installed capacity, and hourly operation."""

    objective: float
    years: int
    hours: int
    additions: dict                 # unit -> per-year module count (solar: kW)
    additions_capacity: dict        # unit -> per-year kW / kWh / kg
    installed: dict                 # unit -> per-year kW / kWh / kg
    dispatch: dict                  # unit -> [Y,H] kW (diesel ids, s, w, f)
    on_state: dict                  # diesel unit -> [Y,H] 0/1
    fuel_lph: dict                  # diesel unit -> [Y,H] l/h (piecewise value)
    el_consumption: Optional[np.ndarray] = None   # [Y,H] kW
    batt_charge: Optional[np.ndarray] = None      # [Y,H] kW
    batt_discharge: Optional[np.ndarray] = None   # [Y,H] kW
    batt_soc: Optional[np.ndarray] = None         # [Y,H] kWh
    batt_ch_state: Optional[np.ndarray] = None    # [Y,H] 0/1
    batt_dch_state: Optional[np.ndarray] = None   # [Y,H] 0/1
    tank_soc: Optional[np.ndarray] = None         # [Y,H] kg
    fingerprint: str = ""
    provenance: str = ""
    verified: bool = False


def npc_capital(unit_cost: float, capacity: float, year: int, r: float) -> float:
    """Net present capital cost of ``capacity`` installed in ``year`` (1-based)."""
    if year < 1:
        raise ModelError(f"year must be >= 1, got {year}")
    return unit_cost * capacity / (1.0 + r) ** (year - 1)


def equation_coverage(labels) -> dict:
    """Map each core tag to whether it is realized in ``labels``.

    Eq22 is covered exactly when all three of its linear substitutes
    Eq23-Eq25 are present.
    """
    tags = {label.split("_", 1)[0].split("[", 1)[0] for label in labels}
    cover = {tag: tag in tags for tag in EQUATION_TAGS}
    cover["Eq22"] = all(cover.get(t, False) for t in ("Eq23", "Eq24", "Eq25"))
    return cover


def _standby_off(spec, year: int) -> bool:
    if spec.standby_parity == "even-years":
        return year % 2 == 0
    if spec.standby_parity == "odd-years":
        return year % 2 == 1
    return False


def _window_years_upto(window, year: int) -> int:
    lo, hi = window
    return max(0, min(hi, year) - lo + 1)


def default_max_units(problem: PlanningProblem) -> dict:
    """Module-count ceilings sized so per-tech capacity <= cap_factor x peak demand."""
    a, cat = problem.assumptions, problem.catalog
    peak = max(problem.profiles.load.values) * (1 + a.load_growth) ** (a.horizon_years - 1)
    target = a.capacity_cap_factor * peak
    out = {}
    if cat.wind:
        out["w"] = max(1, math.ceil(target / cat.wind.rated_kw))
    if cat.battery:
        out["b"] = max(1, math.ceil(target / cat.battery.peak_kw))
    if cat.hydrogen:
        out["f"] = max(1, math.ceil(target / cat.hydrogen.fc_kw))
        out["el"] = max(1, math.ceil(target / cat.hydrogen.el_kw))
        tank_kwh = cat.hydrogen.tank_kg * cat.hydrogen.hhv_kwh_per_kg
        out["q"] = max(1, math.ceil(target * 24.0 / tank_kwh))
    out["s"] = target  # continuous capacity cap in kW
    return out


def build_model(problem: PlanningProblem, max_units: Optional[dict] = None):
    """Compile the problem (including its scenario) into (MilpInstance, VariableIndex)."""
    findings = validate_problem(problem)
    errors = [f for f in findings if f.severity == "error"]
    if errors:
        raise InvariantError(f"{errors[0].field}: {errors[0].message}")

    a, cat, sc = problem.assumptions, problem.catalog, problem.scenario
    Y, H = a.horizon_years, a.rep_hours
    lam = a.days_per_month
    disc = [1.0 / (1.0 + a.discount_rate) ** (y - 1) for y in range(1, Y + 1)]

    use_e = TECH_EXISTING_DIESEL in sc.allowed_tech and cat.diesel_existing
    use_n = TECH_NEW_DIESEL in sc.allowed_tech and cat.diesel_new
    use_s = TECH_SOLAR in sc.allowed_tech and cat.solar
    use_w = TECH_WIND in sc.allowed_tech and cat.wind
    use_b = TECH_BATTERY in sc.allowed_tech and cat.battery
    use_h = TECH_HYDROGEN in sc.allowed_tech and cat.hydrogen

    existing = list(cat.diesel_existing) if use_e else []
    new = list(cat.diesel_new) if use_n else []
    diesel = existing + new
    spec_of = {s.id: s for s in diesel}

    load = [[problem.profiles.load.values[h] * (1 + a.load_growth) ** (y - 1)
             for h in range(H)] for y in range(1, Y + 1)]
    solar_f = ([solar_unit_output(problem.profiles.irradiance.values[h],
                                  problem.profiles.cell_temp.values[h], cat.solar)
                for h in range(H)] if use_s else None)
    wind_kw = ([wind_unit_output(problem.profiles.wind_speed.values[h], cat.wind)
                for h in range(H)] if use_w else None)

    limits = dict(default_max_units(problem))
    limits.update(max_units or {})

    curves = {s.id: linearize_fuel_curve(s, a.fuel_segments) for s in diesel}

    idx = VariableIndex()
    ins = MilpInstance(name=f"{problem.name}-{sc.id}")

    # Expansion technologies: (unit, per-unit capacity, count kind, capital $/capacity).
    expanders = []
    if use_n:
        for s in new:
            expanders.append((s.id, s.rated_kw, BINARY, s.capital_cost_per_kw))
    if use_s:
        expanders.append(("s", None, None, cat.solar.capital_cost_per_kw))
    if use_w:
        expanders.append(("w", cat.wind.rated_kw, INTEGER, cat.wind.capital_cost_per_kw))
    if use_b:
        expanders.append(("b", cat.battery.module_kwh, INTEGER,
                          cat.battery.capital_cost_per_kwh))
    if use_h:
        h2 = cat.hydrogen
        expanders.append(("f", h2.fc_kw, INTEGER, h2.fc_cost_per_unit / h2.fc_kw))
        expanders.append(("el", h2.el_kw, INTEGER, h2.el_cost_per_unit / h2.el_kw))
        expanders.append(("q", h2.tank_kg, INTEGER, h2.tank_cost_per_unit / h2.tank_kg))

    cap_ub = {}
    for unit, rated, kind, _cost in expanders:
        if unit == "s":
            cap_ub[unit] = float(limits["s"])
        elif kind == BINARY:
            cap_ub[unit] = rated * _window_years_upto(a.diesel_invest_window, Y)
        else:
            cap_ub[unit] = rated * limits[unit]

    # Installed-capacity O&M coefficients (objective, per year on I columns).
    om_installed = {}
    if use_s:
        om_installed["s"] = H * cat.solar.om_cost_per_kwh
    if use_w:
        om_installed["w"] = H * cat.wind.om_cost_per_kwh
    if use_b:
        om_installed["b"] = H * cat.battery.om_cost_per_kwh
    if use_h:
        om_installed["el"] = cat.hydrogen.el_om_per_y / cat.hydrogen.el_kw
        om_installed["q"] = cat.hydrogen.tank_om_per_y / cat.hydrogen.tank_kg

    # ------------------------------------------------------------------
    # Columns: investment block first, then hourly operation by (y, h).
    for unit, rated, kind, cost in expanders:
        for y in range(1, Y + 1):
            if unit != "s":
                nmax = 1 if kind == BINARY else limits[unit]
                c = ins.add_col(f"Nadd_{unit}_y{y}", 0, nmax, kind)
                idx.add("add_count", unit, y, None)
                assert c == idx.col("add_count", unit, y)
            c = ins.add_col(f"Phat_{unit}_y{y}", 0, cap_ub[unit], CONTINUOUS,
                            obj=cost * disc[y - 1])
            idx.add("add_capacity", unit, y, None)
            c = ins.add_col(f"I_{unit}_y{y}", 0, cap_ub[unit], CONTINUOUS,
                            obj=om_installed.get(unit, 0.0) * disc[y - 1])
            idx.add("installed", unit, y, None)

    if use_b:
        m_batt = min(cat.battery.peak_kw * limits["b"], a.big_m)
    fc_om_rate = (cat.hydrogen.fc_om_per_h / cat.hydrogen.fc_kw) if use_h else 0.0

    for y in range(1, Y + 1):
        for h in range(1, H + 1):
            for s in existing:
                ins.add_col(f"P_{s.id}_y{y}_h{h}", 0, s.rated_kw, CONTINUOUS,
                            obj=lam * s.om_cost_per_kwh * disc[y - 1])
                idx.add("gen_power", s.id, y, h)
                off = _standby_off(s, y)
                ins.add_col(f"u_{s.id}_y{y}_h{h}", 0, 0 if off else 1, BINARY)
                idx.add("on_state", s.id, y, h)
            for s in new:
                ins.add_col(f"P_{s.id}_y{y}_h{h}", 0, cap_ub[s.id], CONTINUOUS,
                            obj=lam * s.om_cost_per_kwh * disc[y - 1])
                idx.add("gen_power", s.id, y, h)
                ins.add_col(f"u_{s.id}_y{y}_h{h}", 0, 1, BINARY)
                idx.add("on_state", s.id, y, h)
            for s in diesel:
                ins.add_col(f"F_{s.id}_y{y}_h{h}", 0, math.inf, CONTINUOUS,
                            obj=lam * a.diesel_price_per_l * disc[y - 1])
                idx.add("fuel", s.id, y, h)
                curve = curves[s.id]
                if curve.segments > 1 and not curve.convex:
                    top = cap_ub[s.id] if s.id in cap_ub else s.rated_kw
                    for k in range(curve.segments):
                        hi = curve.breakpoints[k + 1]
                        if k == curve.segments - 1:
                            hi = max(hi, top)
                        ins.add_col(f"Fz_{s.id}k{k}_y{y}_h{h}", 0, 1, BINARY)
                        idx.add("fuel_seg", f"{s.id}#k{k}", y, h)
                        ins.add_col(f"Fq_{s.id}k{k}_y{y}_h{h}", 0, hi, CONTINUOUS)
                        idx.add("fuel_seg_power", f"{s.id}#k{k}", y, h)
            if use_s:
                ins.add_col(f"P_s_y{y}_h{h}", 0, max(0.0, solar_f[h - 1]) * cap_ub["s"],
                            CONTINUOUS, obj=0.0)
                idx.add("gen_power", "s", y, h)
            if use_w:
                ins.add_col(f"P_w_y{y}_h{h}", 0,
                            (wind_kw[h - 1] / cat.wind.rated_kw) * cap_ub["w"],
                            CONTINUOUS, obj=0.0)
                idx.add("gen_power", "w", y, h)
            if use_b:
                b = cat.battery
                p_lim = (1 - b.dod_frac) / b.t_ch_h * cap_ub["b"]
                ins.add_col(f"Pch_b_y{y}_h{h}", 0, p_lim, CONTINUOUS)
                idx.add("batt_ch", "b", y, h)
                ins.add_col(f"Pdch_b_y{y}_h{h}", 0,
                            (1 - b.dod_frac) / b.t_dch_h * cap_ub["b"], CONTINUOUS)
                idx.add("batt_dch", "b", y, h)
                ins.add_col(f"SOC_b_y{y}_h{h}", 0, cap_ub["b"], CONTINUOUS)
                idx.add("batt_soc", "b", y, h)
                ins.add_col(f"uch_b_y{y}_h{h}", 0, 1, BINARY)
                idx.add("batt_ch_state", "b", y, h)
                ins.add_col(f"udch_b_y{y}_h{h}", 0, 1, BINARY)
                idx.add("batt_dch_state", "b", y, h)
            if use_h:
                ins.add_col(f"P_f_y{y}_h{h}", 0, cap_ub["f"], CONTINUOUS,
                            obj=lam * fc_om_rate * disc[y - 1])
                idx.add("fc_power", "f", y, h)
                ins.add_col(f"P_el_y{y}_h{h}", 0, cap_ub["el"], CONTINUOUS)
                idx.add("el_power", "el", y, h)
                ins.add_col(f"SOC_q_y{y}_h{h}", 0,
                            cat.hydrogen.tank_max_frac * cap_ub["q"], CONTINUOUS)
                idx.add("tank_soc", "q", y, h)

    # ------------------------------------------------------------------
    # Hourly rows.
    for y in range(1, Y + 1):
        for h in range(1, H + 1):
            coeffs = []
            for s in diesel:
                coeffs.append((idx.col("gen_power", s.id, y, h), 1.0))
            if use_s:
                coeffs.append((idx.col("gen_power", "s", y, h), 1.0))
            if use_w:
                coeffs.append((idx.col("gen_power", "w", y, h), 1.0))
            if use_h:
                coeffs.append((idx.col("fc_power", "f", y, h), 1.0))
                coeffs.append((idx.col("el_power", "el", y, h), -1.0))
            if use_b:
                coeffs.append((idx.col("batt_dch", "b", y, h), 1.0))
                coeffs.append((idx.col("batt_ch", "b", y, h), -1.0))
            ins.add_row(f"Eq4_y{y}_h{h}", "E", load[y - 1][h - 1], coeffs)

            coeffs = []
            for s in new:
                coeffs.append((idx.col("installed", s.id, y), 1.0))
            if use_h:
                coeffs.append((idx.col("installed", "f", y), 1.0))
            if use_b:
                coeffs.append((idx.col("batt_soc", "b", y, h), 1.0))
            if use_s:
                coeffs.append((idx.col("gen_power", "s", y, h), -a.reserve_solar))
            if use_w:
                coeffs.append((idx.col("gen_power", "w", y, h), -a.reserve_wind))
            rhs = (1 + a.reserve_load) * load[y - 1][h - 1]
            rhs -= sum(s.rated_kw for s in existing)
            ins.add_row(f"Eq5_y{y}_h{h}", "G", rhs, coeffs)

            for s in existing:
                p = idx.col("gen_power", s.id, y, h)
                u = idx.col("on_state", s.id, y, h)
                ins.add_row(f"Eq7_{s.id}_y{y}_h{h}", "L", 0.0,
                            [(p, 1.0), (u, -s.rated_kw)])
                ins.add_row(f"Eq9_{s.id}_y{y}_h{h}", "G", 0.0,
                            [(p, 1.0), (u, -s.min_load_frac * s.rated_kw)])
            for s in new:
                p = idx.col("gen_power", s.id, y, h)
                u = idx.col("on_state", s.id, y, h)
                i_col = idx.col("installed", s.id, y)
                u_cap = s.rated_kw * _window_years_upto(a.diesel_invest_window, y)
                ins.add_row(f"Eq6_{s.id}_y{y}_h{h}", "L", 0.0,
                            [(p, 1.0), (i_col, -1.0)])
                ins.add_row(f"Eq6b_{s.id}_y{y}_h{h}", "L", 0.0,
                            [(p, 1.0), (u, -u_cap)])
                psi = s.min_load_frac
                ins.add_row(f"Eq8_{s.id}_y{y}_h{h}", "G", -psi * u_cap,
                            [(p, 1.0), (i_col, -psi), (u, -psi * u_cap)])

            # Commitment cover: committed diesel capacity plus the largest
            # possible non-diesel supply must reach demand.  Implied for any
            # integer-feasible point, but not by the LP relaxation, which it
            # tightens substantially on diesel-heavy scenarios.
            slack_ub = 0.0
            if use_s:
                slack_ub += max(0.0, solar_f[h - 1]) * cap_ub["s"]
            if use_w:
                slack_ub += (wind_kw[h - 1] / cat.wind.rated_kw) * cap_ub["w"]
            if use_h:
                slack_ub += cap_ub["f"]
            if use_b:
                slack_ub += (1 - cat.battery.dod_frac) / cat.battery.t_dch_h \
                    * cap_ub["b"]
            cover_rhs = load[y - 1][h - 1] - slack_ub
            if diesel and cover_rhs > 0:
                coeffs = [(idx.col("on_state", s.id, y, h), s.rated_kw)
                          for s in existing]
                for s in new:
                    u_cap = s.rated_kw * _window_years_upto(a.diesel_invest_window, y)
                    if u_cap > 0:
                        coeffs.append((idx.col("on_state", s.id, y, h), u_cap))
                ins.add_row(f"CutCommit_y{y}_h{h}", "G", cover_rhs, coeffs)

            for s in diesel:
                curve = curves[s.id]
                p = idx.col("gen_power", s.id, y, h)
                u = idx.col("on_state", s.id, y, h)
                fcol = idx.col("fuel", s.id, y, h)
                if curve.segments == 1:
                    ins.add_row(f"Fuel_{s.id}_y{y}_h{h}", "E", 0.0,
                                [(fcol, 1.0), (p, -curve.slopes[0]),
                                 (u, -curve.intercepts[0])])
                elif curve.convex:
                    for k in range(curve.segments):
                        ins.add_row(f"Fuel_{s.id}k{k}_y{y}_h{h}", "G", 0.0,
                                    [(fcol, 1.0), (p, -curve.slopes[k]),
                                     (u, -curve.intercepts[k])])
                else:
                    zcols = [idx.col("fuel_seg", f"{s.id}#k{k}", y, h)
                             for k in range(curve.segments)]
                    qcols = [idx.col("fuel_seg_power", f"{s.id}#k{k}", y, h)
                             for k in range(curve.segments)]
                    for k in range(curve.segments):
                        hi = ins.col_ub[qcols[k]]
                        ins.add_row(f"FuelSegUB_{s.id}k{k}_y{y}_h{h}", "L", 0.0,
                                    [(qcols[k], 1.0), (zcols[k], -hi)])
                        ins.add_row(f"FuelSegLB_{s.id}k{k}_y{y}_h{h}", "G", 0.0,
                                    [(qcols[k], 1.0),
                                     (zcols[k], -curve.breakpoints[k])])
                    ins.add_row(f"FuelPick_{s.id}_y{y}_h{h}", "E", 0.0,
                                [(u, -1.0)] + [(z, 1.0) for z in zcols])
                    ins.add_row(f"FuelSplit_{s.id}_y{y}_h{h}", "E", 0.0,
                                [(p, 1.0)] + [(q, -1.0) for q in qcols])
                    ins.add_row(f"Fuel_{s.id}_y{y}_h{h}", "E", 0.0,
                                [(fcol, 1.0)]
                                + [(qcols[k], -curve.slopes[k])
                                   for k in range(curve.segments)]
                                + [(zcols[k], -curve.intercepts[k])
                                   for k in range(curve.segments)])

            if use_s:
                ins.add_row(f"Eq12_y{y}_h{h}", "E", 0.0,
                            [(idx.col("gen_power", "s", y, h), 1.0),
                             (idx.col("installed", "s", y), -solar_f[h - 1])])
            if use_w:
                ins.add_row(f"Eq13_y{y}_h{h}", "E", 0.0,
                            [(idx.col("gen_power", "w", y, h), 1.0),
                             (idx.col("installed", "w", y),
                              -wind_kw[h - 1] / cat.wind.rated_kw)])

            if use_b:
                b = cat.battery
                soc = idx.col("batt_soc", "b", y, h)
                i_b = idx.col("installed", "b", y)
                pch = idx.col("batt_ch", "b", y, h)
                pdch = idx.col("batt_dch", "b", y, h)
                uch = idx.col("batt_ch_state", "b", y, h)
                udch = idx.col("batt_dch_state", "b", y, h)
                ins.add_row(f"Eq16_b_y{y}_h{h}", "L", 0.0, [(soc, 1.0), (i_b, -1.0)])
                ins.add_row(f"Eq17_b_y{y}_h{h}", "G", 0.0,
                            [(soc, 1.0), (i_b, -b.dod_frac)])
                ins.add_row(f"Eq18_b_y{y}_h{h}", "L", 0.0,
                            [(pdch, 1.0), (i_b, -(1 - b.dod_frac) / b.t_dch_h)])
                ins.add_row(f"Eq19_b_y{y}_h{h}", "L", 0.0,
                            [(pch, 1.0), (i_b, -(1 - b.dod_frac) / b.t_ch_h)])
                ins.add_row(f"Eq20_b_y{y}_h{h}", "G", 0.0, [(pdch, 1.0), (udch, -1.0)])
                ins.add_row(f"Eq21_b_y{y}_h{h}", "G", 0.0, [(pch, 1.0), (uch, -1.0)])
                ins.add_row(f"Eq23_b_y{y}_h{h}", "L", 0.0, [(pdch, 1.0), (udch, -m_batt)])
                ins.add_row(f"Eq24_b_y{y}_h{h}", "L", 0.0, [(pch, 1.0), (uch, -m_batt)])
                ins.add_row(f"Eq25_b_y{y}_h{h}", "L", 1.0, [(uch, 1.0), (udch, 1.0)])
                if h < H:
                    ins.add_row(f"Eq14_b_y{y}_h{h}", "E", 0.0,
                                [(idx.col("batt_soc", "b", y, h + 1), 1.0),
                                 (soc, -1.0), (pch, -b.eta_ch), (pdch, 1.0 / b.eta_dch)])

            if use_h:
                h2 = cat.hydrogen
                socq = idx.col("tank_soc", "q", y, h)
                i_q = idx.col("installed", "q", y)
                pf = idx.col("fc_power", "f", y, h)
                pel = idx.col("el_power", "el", y, h)
                ins.add_row(f"Eq29_q_y{y}_h{h}", "L", 0.0,
                            [(socq, 1.0), (i_q, -h2.tank_max_frac)])
                ins.add_row(f"Eq30_q_y{y}_h{h}", "G", 0.0,
                            [(socq, 1.0), (i_q, -h2.tank_min_frac)])
                ins.add_row(f"Eq31_f_y{y}_h{h}", "L", 0.0,
                            [(pf, 1.0), (idx.col("installed", "f", y), -1.0)])
                ins.add_row(f"Eq31_el_y{y}_h{h}", "L", 0.0,
                            [(pel, 1.0), (idx.col("installed", "el", y), -1.0)])
                if h < H:
                    c_el = h2.eta_el / (h2.hhv_kwh_per_kg * (1 + h2.compressor_load))
                    c_fc = 1.0 / (h2.hhv_kwh_per_kg * h2.eta_fc)
                    ins.add_row(f"Eq27_q_y{y}_h{h}", "E", 0.0,
                                [(idx.col("tank_soc", "q", y, h + 1), 1.0),
                                 (socq, -1.0), (pel, -c_el), (pf, c_fc)])

    # Year-wrap storage recursions.
    for y in range(1, Y):
        if use_b:
            b = cat.battery
            ins.add_row(f"Eq15_b_y{y}", "E", 0.0,
                        [(idx.col("batt_soc", "b", y + 1, 1), 1.0),
                         (idx.col("batt_soc", "b", y, H), -1.0),
                         (idx.col("batt_ch", "b", y, H), -b.eta_ch),
                         (idx.col("batt_dch", "b", y, H), 1.0 / b.eta_dch)])
        if use_h:
            h2 = cat.hydrogen
            c_el = h2.eta_el / (h2.hhv_kwh_per_kg * (1 + h2.compressor_load))
            c_fc = 1.0 / (h2.hhv_kwh_per_kg * h2.eta_fc)
            ins.add_row(f"Eq28_q_y{y}", "E", 0.0,
                        [(idx.col("tank_soc", "q", y + 1, 1), 1.0),
                         (idx.col("tank_soc", "q", y, H), -1.0),
                         (idx.col("el_power", "el", y, H), -c_el),
                         (idx.col("fc_power", "f", y, H), c_fc)])

    # Capacity recursion and additions.
    for unit, rated, kind, _cost in expanders:
        for y in range(1, Y + 1):
            coeffs = [(idx.col("installed", unit, y), 1.0),
                      (idx.col("add_capacity", unit, y), -1.0)]
            if y > 1:
                coeffs.append((idx.col("installed", unit, y - 1), -1.0))
            ins.add_row(f"Eq2_{unit}_y{y}", "E", 0.0, coeffs)
            if unit != "s":
                ins.add_row(f"Eq3_{unit}_y{y}", "E", 0.0,
                            [(idx.col("add_capacity", unit, y), 1.0),
                             (idx.col("add_count", unit, y), -rated)])

    # Diesel service life and yearly availability.
    for s in diesel:
        ins.add_row(f"Eq10_{s.id}", "L", s.lifetime_h,
                    [(idx.col("on_state", s.id, y, h), lam)
                     for y in range(1, Y + 1) for h in range(1, H + 1)])
        for y in range(1, Y + 1):
            ins.add_row(f"Eq11_{s.id}_y{y}", "L", H * (1 - a.maintenance_frac),
                        [(idx.col("on_state", s.id, y, h), 1.0)
                         for h in range(1, H + 1)])

    if use_b:
        coeffs = []
        for y in range(1, Y + 1):
            for h in range(1, H + 1):
                coeffs.append((idx.col("batt_ch", "b", y, h), 1.0))
                coeffs.append((idx.col("batt_dch", "b", y, h), 1.0))
        for y in range(1, Y + 1):
            coeffs.append((idx.col("add_capacity", "b", y), -cat.battery.cycle_life))
        ins.add_row("Eq26_b", "L", 0.0, coeffs)

    # Storage initial conditions (first hour of the horizon).
    if use_b:
        ins.add_row("InitSOC_b_y1", "E", 0.0,
                    [(idx.col("batt_soc", "b", 1, 1), 1.0),
                     (idx.col("installed", "b", 1), -cat.battery.soc0_frac)])
    if use_h:
        ins.add_row("InitSOC_q_y1", "E", 0.0,
                    [(idx.col("tank_soc", "q", 1, 1), 1.0),
                     (idx.col("installed", "q", 1), -cat.hydrogen.tank_min_frac)])

    ins.meta.update({
        "years": Y,
        "hours": H,
        "existing_units": [s.id for s in existing],
        "new_units": [s.id for s in new],
        "expander_units": [u for u, *_ in expanders],
        "present_techs": sorted(t for t, flag in (
            (TECH_EXISTING_DIESEL, use_e), (TECH_NEW_DIESEL, use_n),
            (TECH_SOLAR, use_s), (TECH_WIND, use_w), (TECH_BATTERY, use_b),
            (TECH_HYDROGEN, use_h)) if flag),
        "demand_energy_y": [sum(load[y - 1]) for y in range(1, Y + 1)],
        "res_invest_window": a.res_invest_window,
        "diesel_invest_window": a.diesel_invest_window,
        "discount": disc,
        "scenario_applied": None,
        "el_unit_cost": cat.hydrogen.el_cost_per_unit if cat.hydrogen else None,
        "curves": curves,
        "max_units": limits,
    })
    apply_scenario(ins, idx, sc)
    return ins, idx


def apply_scenario(instance: MilpInstance, index: VariableIndex,
                   scenario: ScenarioDefinition) -> MilpInstance:
    """Impose scenario restrictions on a freshly built instance (once)."""
    if instance.meta.get("scenario_applied") is not None:
        raise ModelError("scenario already applied to this instance")
    meta = instance.meta
    Y = meta["years"]
    present = set(meta["present_techs"])
    for tech in (TECH_SOLAR, TECH_WIND, TECH_BATTERY, TECH_HYDROGEN):
        wants = tech in scenario.allowed_tech
        if wants and tech not in present:
            raise ModelError(f"scenario {scenario.id} allows {tech}, "
                             "absent from the built model")

    # Disallowed technologies: zero every associated column.
    for col, (family, unit, year, hour) in index.columns():
        tech = UNIT_TECH.get(unit.split("#")[0])
        if tech is None:
            tech = (TECH_NEW_DIESEL if unit.split("#")[0] in meta["new_units"]
                    else TECH_EXISTING_DIESEL)
        if tech not in scenario.allowed_tech:
            instance.fix_col(col, 0.0)

    # Investment windows.
    res_lo, res_hi = meta["res_invest_window"]
    dsl_lo, dsl_hi = meta["diesel_invest_window"]
    for unit in meta["expander_units"]:
        lo, hi = (dsl_lo, dsl_hi) if unit in meta["new_units"] else (res_lo, res_hi)
        for y in range(1, Y + 1):
            if lo <= y <= hi:
                continue
            if index.has("add_count", unit, y):
                instance.fix_col(index.col("add_count", unit, y), 0.0)
            instance.fix_col(index.col("add_capacity", unit, y), 0.0)

    # Reserve-only diesel: no dispatch, capacities stay in the reserve rows.
    if scenario.diesel_reserve_only:
        for unit in meta["existing_units"] + meta["new_units"]:
            for col, _key in index.columns(family="gen_power", unit=unit):
                instance.fix_col(col, 0.0)
            for col, _key in index.columns(family="on_state", unit=unit):
                instance.fix_col(col, 0.0)

    # Minimum-inclusion rows.
    if scenario.require_battery:
        if "b" not in meta["expander_units"]:
            raise ModelError(f"scenario {scenario.id} requires a battery module "
                             "but batteries are not in the model")
        ins_coeffs = [(index.col("add_count", "b", y), 1.0) for y in range(1, Y + 1)]
        instance.add_row("ScenBattMin", "G", 1.0, ins_coeffs)
    if scenario.require_hydrogen:
        for unit in ("f", "el", "q"):
            if unit not in meta["expander_units"]:
                raise ModelError(f"scenario {scenario.id} requires hydrogen "
                                 "but it is not in the model")
            instance.add_row(f"ScenH2Min_{unit}", "G", 1.0,
                             [(index.col("add_count", unit, y), 1.0)
                              for y in range(1, Y + 1)])
    if scenario.solar_min_share > 0:
        if not index.has("installed", "s", 1):
            raise ModelError(f"scenario {scenario.id} sets a solar share "
                             "but solar is not in the model")
        H = meta["hours"]
        for y in range(1, Y + 1):
            instance.add_row(
                f"ScenSolarMin_y{y}", "G",
                scenario.solar_min_share * meta["demand_energy_y"][y - 1],
                [(index.col("gen_power", "s", y, h), 1.0) for h in range(1, H + 1)])
    if scenario.mandatory_h2_year1:
        for unit in ("f", "el", "q"):
            col = index.col("add_count", unit, 1)
            instance.col_lb[col] = max(instance.col_lb[col], 1.0)
    if scenario.el_replacement_year is not None and scenario.el_replacement_year <= Y:
        cost = meta.get("el_unit_cost")
        if cost is None:
            raise ModelError(f"scenario {scenario.id} schedules an electrolizer "
                             "replacement but the catalog has no hydrogen section")
        instance.obj_offset += cost * meta["discount"][scenario.el_replacement_year - 1]

    instance.meta["scenario_applied"] = scenario.id
    return instance


# ---------------------------------------------------------------------------
# Independent objective re-evaluation (Eq. 1 outside the matrix)

@dataclass(frozen=True)
class RecomputedObjective:
    total: float            # with piecewise fuel, comparable to the solver objective
    total_exact_fuel: float  # with the exact quadratic fuel curve
    capital: float
    fuel: float
    fuel_exact: float
    om: float
    offset: float
    litres: float            # undiscounted litres over the horizon, exact curve
    litres_piecewise: float


def recompute_objective(plan: PlanSolution, problem: PlanningProblem) -> RecomputedObjective:
    """Re-evaluate the cost function from a plan, outside the constraint matrix."""
    a, cat, sc = problem.assumptions, problem.catalog, problem.scenario
    Y, H = plan.years, plan.hours
    if Y != a.horizon_years or H != a.rep_hours:
        raise ModelError(f"plan is {Y}x{H}, problem is "
                         f"{a.horizon_years}x{a.rep_hours}")
    lam = a.days_per_month
    disc = [1.0 / (1.0 + a.discount_rate) ** (y - 1) for y in range(1, Y + 1)]
    specs = {s.id: s for s in cat.diesel_existing + cat.diesel_new}
    curves = {uid: linearize_fuel_curve(specs[uid], a.fuel_segments)
              for uid in plan.dispatch if uid in specs}

    capital_unit = {}
    for s in cat.diesel_new:
        capital_unit[s.id] = s.capital_cost_per_kw
    if cat.solar:
        capital_unit["s"] = cat.solar.capital_cost_per_kw
    if cat.wind:
        capital_unit["w"] = cat.wind.capital_cost_per_kw
    if cat.battery:
        capital_unit["b"] = cat.battery.capital_cost_per_kwh
    if cat.hydrogen:
        capital_unit["f"] = cat.hydrogen.fc_cost_per_unit / cat.hydrogen.fc_kw
        capital_unit["el"] = cat.hydrogen.el_cost_per_unit / cat.hydrogen.el_kw
        capital_unit["q"] = cat.hydrogen.tank_cost_per_unit / cat.hydrogen.tank_kg

    capital = 0.0
    for unit, caps in plan.additions_capacity.items():
        for y in range(1, Y + 1):
            capital += npc_capital(capital_unit[unit], caps[y - 1], y, a.discount_rate)

    fuel_pw = fuel_exact = litres = litres_pw = 0.0
    om = 0.0
    for uid, power in plan.dispatch.items():
        if uid in specs:
            spec = specs[uid]
            on = plan.on_state[uid]
            for y in range(Y):
                for h in range(H):
                    if on[y, h] < 0.5:
                        continue
                    p = power[y, h]
                    rate_pw = _pw_rate(curves[uid], p)
                    rate_exact = spec.fuel_at(p)
                    litres += lam * rate_exact
                    litres_pw += lam * rate_pw
                    fuel_pw += lam * a.diesel_price_per_l * rate_pw * disc[y]
                    fuel_exact += lam * a.diesel_price_per_l * rate_exact * disc[y]
                    om += lam * spec.om_cost_per_kwh * p * disc[y]
        elif uid == "f" and cat.hydrogen:
            rate = cat.hydrogen.fc_om_per_h / cat.hydrogen.fc_kw
            for y in range(Y):
                om += lam * rate * float(np.sum(power[y])) * disc[y]

    om_installed = {}
    if cat.solar:
        om_installed["s"] = H * cat.solar.om_cost_per_kwh
    if cat.wind:
        om_installed["w"] = H * cat.wind.om_cost_per_kwh
    if cat.battery:
        om_installed["b"] = H * cat.battery.om_cost_per_kwh
    if cat.hydrogen:
        om_installed["el"] = cat.hydrogen.el_om_per_y / cat.hydrogen.el_kw
        om_installed["q"] = cat.hydrogen.tank_om_per_y / cat.hydrogen.tank_kg
    for unit, coeff in om_installed.items():
        if unit in plan.installed:
            for y in range(Y):
                om += coeff * plan.installed[unit][y] * disc[y]

    offset = 0.0
    if (sc.el_replacement_year is not None and sc.el_replacement_year <= Y
            and cat.hydrogen and TECH_HYDROGEN in sc.allowed_tech):
        offset = cat.hydrogen.el_cost_per_unit * disc[sc.el_replacement_year - 1]

    return RecomputedObjective(
        total=capital + fuel_pw + om + offset,
        total_exact_fuel=capital + fuel_exact + om + offset,
        capital=capital, fuel=fuel_pw, fuel_exact=fuel_exact, om=om,
        offset=offset, litres=litres, litres_piecewise=litres_pw)


def _pw_rate(curve, p: float) -> float:
    if p < curve.breakpoints[0] - 1e-9:
        # below the single-unit minimum load the first chord extends down,
        # matching the epigraph/equality fuel rows
        return curve.slopes[0] * p + curve.intercepts[0]
    if p > curve.breakpoints[-1] + 1e-9:
        # linear extension of the last chord (aggregated new-diesel capacity)
        return curve.slopes[-1] * p + curve.intercepts[-1]
    return curve.value(p)
