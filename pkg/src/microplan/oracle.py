"""Independent ground truth: exhaustive enumeration and a rule-based simulator.

``enumerate_optimum`` fixes every integer assignment in turn and solves the
remaining continuous program with the embedded LP; the winning schedule is
then re-checked by ``evaluate_schedule``, a constraint evaluator written
directly from the operating rules and sharing no row-generation code with
the model compiler.  ``simulate_dispatch`` builds a feasible schedule
greedily (renewables first, storage next, diesel last) and prices it with
the same cost convention, giving an upper bound on the optimum.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .catalog import (
    TECH_EXISTING_DIESEL,
    TECH_NEW_DIESEL,
    DieselGenSpec,
    PlanningProblem,
    problem_from_dict,
    validate_problem,
)
from .model import PlanSolution, build_model, recompute_objective
from .profiles import linearize_fuel_curve, solar_unit_output, wind_unit_output
from .simplex import BoundedSimplex
from .solve import plan_from_values

_TOL = 1e-6


class OracleError(RuntimeError):
    """Enumeration bounds exceeded or internal oracle inconsistency."""


@dataclass(frozen=True)
class TinyInstanceSpec:
    """Bounds that keep exhaustive enumeration tractable."""

    years: int = 2
    hours: int = 8
    max_modules: int = 2
    max_integer_cols: int = 24
    max_assignments: int = 1 << 22


# ---------------------------------------------------------------------------
# Independent schedule evaluator (no shared row-generation code)

def evaluate_schedule(problem: PlanningProblem, plan: PlanSolution,
                      tol: float = _TOL) -> list:
    """Check a plan against the operating rules; returns violation strings."""
    a, cat, sc = problem.assumptions, problem.catalog, problem.scenario
    Y, H = plan.years, plan.hours
    v: list = []

    def bad(cond, msg):
        if cond:
            v.append(msg)

    existing = [s for s in cat.diesel_existing
                if TECH_EXISTING_DIESEL in sc.allowed_tech]
    new = [s for s in cat.diesel_new if TECH_NEW_DIESEL in sc.allowed_tech]
    rated = {s.id: s.rated_kw for s in existing + new}
    unit_rated = {"w": cat.wind.rated_kw if cat.wind else 0.0,
                  "b": cat.battery.module_kwh if cat.battery else 0.0,
                  "f": cat.hydrogen.fc_kw if cat.hydrogen else 0.0,
                  "el": cat.hydrogen.el_kw if cat.hydrogen else 0.0,
                  "q": cat.hydrogen.tank_kg if cat.hydrogen else 0.0}
    for s in new:
        unit_rated[s.id] = s.rated_kw

    # capacity bookkeeping: recursion and per-unit sizes
    for unit, adds in plan.additions_capacity.items():
        run = 0.0
        for y in range(Y):
            bad(adds[y] < -tol, f"{unit}: negative addition in year {y + 1}")
            run += adds[y]
            bad(abs(plan.installed[unit][y] - run) > tol,
                f"{unit}: installed capacity breaks the recursion in year {y + 1}")
        if unit != "s":
            for y in range(Y):
                expect = plan.additions[unit][y] * unit_rated[unit]
                bad(abs(adds[y] - expect) > tol,
                    f"{unit}: addition not a whole number of units in year {y + 1}")
                bad(abs(plan.additions[unit][y] - round(plan.additions[unit][y])) > tol,
                    f"{unit}: fractional unit count in year {y + 1}")

    def inst(unit, y):
        arr = plan.installed.get(unit)
        return float(arr[y - 1]) if arr is not None else 0.0

    load = [[problem.profiles.load.values[h] * (1 + a.load_growth) ** (y - 1)
             for h in range(H)] for y in range(1, Y + 1)]
    b = cat.battery
    h2 = cat.hydrogen

    for y in range(1, Y + 1):
        for h in range(1, H + 1):
            supply = 0.0
            for s in existing + new:
                p = float(plan.dispatch[s.id][y - 1, h - 1])
                on = float(plan.on_state[s.id][y - 1, h - 1])
                bad(abs(on - round(on)) > tol or round(on) not in (0, 1),
                    f"{s.id}: on-state not binary at y{y} h{h}")
                cap = s.rated_kw if s in existing else inst(s.id, y)
                bad(p > cap * on + tol,
                    f"{s.id}: power above capacity*on at y{y} h{h}")
                bad(p < s.min_load_frac * cap * on - tol,
                    f"{s.id}: power below minimum load at y{y} h{h}")
                if s in existing and _standby(s, y):
                    bad(on > 0.5, f"{s.id}: committed in a standby year y{y}")
                supply += p
            ps = pw = 0.0
            if "s" in plan.dispatch:
                ps = float(plan.dispatch["s"][y - 1, h - 1])
                f_h = solar_unit_output(problem.profiles.irradiance.values[h - 1],
                                        problem.profiles.cell_temp.values[h - 1],
                                        cat.solar)
                bad(abs(ps - f_h * inst("s", y)) > tol,
                    f"solar output off its conversion value at y{y} h{h}")
                supply += ps
            if "w" in plan.dispatch:
                pw = float(plan.dispatch["w"][y - 1, h - 1])
                w_kw = wind_unit_output(problem.profiles.wind_speed.values[h - 1],
                                        cat.wind)
                bad(abs(pw - w_kw * inst("w", y) / cat.wind.rated_kw) > tol,
                    f"wind output off its turbine curve at y{y} h{h}")
                supply += pw
            draw = load[y - 1][h - 1]
            if plan.batt_charge is not None:
                supply += float(plan.batt_discharge[y - 1, h - 1])
                draw += float(plan.batt_charge[y - 1, h - 1])
            if plan.tank_soc is not None:
                supply += float(plan.dispatch["f"][y - 1, h - 1])
                draw += float(plan.el_consumption[y - 1, h - 1])
            bad(abs(supply - draw) > tol, f"supply-demand imbalance at y{y} h{h}: "
                f"{supply - draw:+.6g} kW")

            reserve = sum(s.rated_kw for s in existing)
            reserve += sum(inst(s.id, y) for s in new)
            reserve += inst("f", y)
            if plan.batt_soc is not None:
                reserve += float(plan.batt_soc[y - 1, h - 1])
            need = (1 + a.reserve_load) * load[y - 1][h - 1]
            need += a.reserve_solar * ps + a.reserve_wind * pw
            bad(reserve < need - tol, f"operating reserve short at y{y} h{h}")

            if plan.batt_charge is not None:
                pch = float(plan.batt_charge[y - 1, h - 1])
                pdch = float(plan.batt_discharge[y - 1, h - 1])
                soc = float(plan.batt_soc[y - 1, h - 1])
                cap = inst("b", y)
                bad(soc > cap + tol, f"battery SOC above capacity at y{y} h{h}")
                bad(soc < b.dod_frac * cap - tol,
                    f"battery SOC below DoD floor at y{y} h{h}")
                bad(pdch > (1 - b.dod_frac) / b.t_dch_h * cap + tol,
                    f"battery discharge above limit at y{y} h{h}")
                bad(pch > (1 - b.dod_frac) / b.t_ch_h * cap + tol,
                    f"battery charge above limit at y{y} h{h}")
                bad(pch > tol and pdch > tol,
                    f"battery charges and discharges at y{y} h{h}")
                bad(0 < pch < 1 - tol, f"battery charge below 1 kW minimum at y{y} h{h}")
                bad(0 < pdch < 1 - tol,
                    f"battery discharge below 1 kW minimum at y{y} h{h}")
            if plan.tank_soc is not None:
                socq = float(plan.tank_soc[y - 1, h - 1])
                capq = inst("q", y)
                bad(socq > h2.tank_max_frac * capq + tol,
                    f"tank above maximum at y{y} h{h}")
                bad(socq < h2.tank_min_frac * capq - tol,
                    f"tank below minimum at y{y} h{h}")
                bad(float(plan.dispatch["f"][y - 1, h - 1]) > inst("f", y) + tol,
                    f"fuel cell above installed capacity at y{y} h{h}")
                bad(float(plan.el_consumption[y - 1, h - 1]) > inst("el", y) + tol,
                    f"electrolizer above installed capacity at y{y} h{h}")

    # storage recursions, including the year wrap
    if plan.batt_charge is not None:
        bad(abs(plan.batt_soc[0, 0] - b.soc0_frac * inst("b", 1)) > tol,
            "battery initial state off its specified fraction")
        for y in range(1, Y + 1):
            for h in range(1, H):
                step = (b.eta_ch * plan.batt_charge[y - 1, h - 1]
                        - plan.batt_discharge[y - 1, h - 1] / b.eta_dch)
                bad(abs(plan.batt_soc[y - 1, h] - plan.batt_soc[y - 1, h - 1] - step) > tol,
                    f"battery SOC recursion broken at y{y} h{h}")
            if y < Y:
                step = (b.eta_ch * plan.batt_charge[y - 1, H - 1]
                        - plan.batt_discharge[y - 1, H - 1] / b.eta_dch)
                bad(abs(plan.batt_soc[y, 0] - plan.batt_soc[y - 1, H - 1] - step) > tol,
                    f"battery SOC year wrap broken at y{y}")
        through = float(np.sum(plan.batt_charge) + np.sum(plan.batt_discharge))
        budget = b.cycle_life * float(np.sum(plan.additions_capacity["b"]))
        bad(through > budget + tol, "battery cycle-life budget exceeded")
    if plan.tank_soc is not None:
        c_el = h2.eta_el / (h2.hhv_kwh_per_kg * (1 + h2.compressor_load))
        c_fc = 1.0 / (h2.hhv_kwh_per_kg * h2.eta_fc)
        bad(abs(plan.tank_soc[0, 0] - h2.tank_min_frac * inst("q", 1)) > tol,
            "tank initial state off its specified fraction")
        for y in range(1, Y + 1):
            for h in range(1, H):
                step = (c_el * plan.el_consumption[y - 1, h - 1]
                        - c_fc * plan.dispatch["f"][y - 1, h - 1])
                bad(abs(plan.tank_soc[y - 1, h] - plan.tank_soc[y - 1, h - 1] - step) > tol,
                    f"tank recursion broken at y{y} h{h}")
            if y < Y:
                step = (c_el * plan.el_consumption[y - 1, H - 1]
                        - c_fc * plan.dispatch["f"][y - 1, H - 1])
                bad(abs(plan.tank_soc[y, 0] - plan.tank_soc[y - 1, H - 1] - step) > tol,
                    f"tank year wrap broken at y{y}")

    # service life and availability
    for s in existing + new:
        on = plan.on_state[s.id]
        bad(a.days_per_month * float(np.sum(on)) > s.lifetime_h + tol,
            f"{s.id}: service-life budget exceeded")
        for y in range(Y):
            bad(float(np.sum(on[y])) > H * (1 - a.maintenance_frac) + tol,
                f"{s.id}: availability budget exceeded in year {y + 1}")

    # scenario restrictions
    res_lo, res_hi = a.res_invest_window
    dsl_lo, dsl_hi = a.diesel_invest_window
    new_ids = {s.id for s in new}
    for unit, adds in plan.additions_capacity.items():
        lo, hi = (dsl_lo, dsl_hi) if unit in new_ids else (res_lo, res_hi)
        for y in range(1, Y + 1):
            if not (lo <= y <= hi):
                bad(adds[y - 1] > tol,
                    f"{unit}: investment outside its window in year {y}")
    if sc.diesel_reserve_only:
        for s in existing + new:
            bad(float(np.sum(plan.dispatch[s.id])) > tol
                or float(np.sum(plan.on_state[s.id])) > tol,
                f"{s.id}: dispatched in a reserve-only scenario")
    if sc.require_battery:
        bad(float(np.sum(plan.additions.get("b", np.zeros(1)))) < 1 - tol,
            "battery minimum inclusion unmet")
    if sc.require_hydrogen:
        for unit in ("f", "el", "q"):
            bad(float(np.sum(plan.additions.get(unit, np.zeros(1)))) < 1 - tol,
                f"hydrogen minimum inclusion unmet ({unit})")
    if sc.solar_min_share > 0 and "s" in plan.dispatch:
        for y in range(1, Y + 1):
            produced = float(np.sum(plan.dispatch["s"][y - 1]))
            demand = sum(load[y - 1])
            bad(produced < sc.solar_min_share * demand - tol,
                f"solar energy share below minimum in year {y}")
    if sc.mandatory_h2_year1:
        for unit in ("f", "el", "q"):
            bad(plan.additions.get(unit, np.zeros(1))[0] < 1 - tol,
                f"mandatory first-year hydrogen unit missing ({unit})")
    return v


def _standby(spec: DieselGenSpec, year: int) -> bool:
    if spec.standby_parity == "even-years":
        return year % 2 == 0
    if spec.standby_parity == "odd-years":
        return year % 2 == 1
    return False


# ---------------------------------------------------------------------------
# Exhaustive enumeration

def enumerate_optimum(problem: PlanningProblem,
                      spec: TinyInstanceSpec = TinyInstanceSpec()) -> PlanSolution:
    """Global optimum by trying every integer assignment; certifies optimality.

    Assignments are screened before any LP: rows linking one integer to one
    continuous column become derived bounds of the fixed assignment (an
    off generator pins its dispatch to zero, and so on), rows over integer
    columns only are evaluated outright, and an interval check plus an
    objective dominance bound discard everything provably infeasible or
    worse than the incumbent.  Surviving assignments get the embedded LP.
    """
    instance, index = build_model(problem)
    c, lb, ub, vartype, senses, rhs = instance.arrays()
    int_cols = np.flatnonzero(vartype != "C")
    if int_cols.size > spec.max_integer_cols:
        raise OracleError(f"{int_cols.size} integer columns exceed the "
                          f"enumeration bound {spec.max_integer_cols}")
    ranges = []
    total = 1
    for j in int_cols:
        r = range(int(math.ceil(lb[j] - 1e-9)), int(math.floor(ub[j] + 1e-9)) + 1)
        if len(r) == 0:
            return _raise_all_infeasible(problem)
        ranges.append(r)
        total *= len(r)
    if total > spec.max_assignments:
        raise OracleError(f"{total} assignments exceed the enumeration bound "
                          f"{spec.max_assignments}")

    engine = BoundedSimplex(instance.matrix(), senses, rhs, c)
    A = instance.matrix().toarray()
    rhs_arr = np.asarray(rhs)
    is_int = np.zeros(instance.n_cols, dtype=bool)
    is_int[int_cols] = True
    int_pos = {int(j): k for k, j in enumerate(int_cols)}

    # Structural screens derived from the row list.
    pure_int = []        # (sense, rhs, [(slot, coeff)])
    derived = []         # (sense, rhs, cont_col, cont_coeff, [(slot, coeff)])
    for r in range(instance.n_rows):
        entries = instance.row_entries(r)
        cols = [ccol for ccol, _ in entries]
        if all(is_int[ccol] for ccol in cols):
            pure_int.append((instance.row_sense[r], rhs_arr[r],
                             [(int_pos[ccol], v) for ccol, v in entries]))
            continue
        cont_entries = [(ccol, v) for ccol, v in entries if not is_int[ccol]]
        if len(cont_entries) == 1:
            ccol, cv = cont_entries[0]
            derived.append((instance.row_sense[r], rhs_arr[r], ccol, cv,
                            [(int_pos[icol], v) for icol, v in entries
                             if is_int[icol]]))

    pos_part = np.clip(A, 0, None)
    neg_part = np.clip(A, None, 0)
    is_L = senses == "L"
    is_G = senses == "G"
    is_E = senses == "E"
    obj_pos = np.clip(c, 0, None)
    obj_neg = np.clip(c, None, 0)

    best = None          # (objective, assignment, x)
    work_lb = np.empty_like(lb)
    work_ub = np.empty_like(ub)
    for assignment in itertools.product(*ranges):
        vals = np.asarray(assignment, dtype=float)
        ok = True
        for sense, b_r, terms in pure_int:
            act = sum(v * vals[k] for k, v in terms)
            if ((sense == "L" and act > b_r + _TOL)
                    or (sense == "G" and act < b_r - _TOL)
                    or (sense == "E" and abs(act - b_r) > _TOL)):
                ok = False
                break
        if not ok:
            continue
        np.copyto(work_lb, lb)
        np.copyto(work_ub, ub)
        work_lb[int_cols] = vals
        work_ub[int_cols] = vals
        for sense, b_r, ccol, cv, terms in derived:
            resid = b_r - sum(v * vals[k] for k, v in terms)
            val = resid / cv
            if sense == "E":
                work_lb[ccol] = max(work_lb[ccol], val)
                work_ub[ccol] = min(work_ub[ccol], val)
            elif (sense == "L") == (cv > 0):
                work_ub[ccol] = min(work_ub[ccol], val)
            else:
                work_lb[ccol] = max(work_lb[ccol], val)
        if np.any(work_lb > work_ub + 1e-9):
            continue
        lo_f = np.maximum(work_lb, -1e12)
        hi_f = np.minimum(work_ub, 1e12)
        hi_act = pos_part @ hi_f + neg_part @ lo_f
        lo_act = pos_part @ lo_f + neg_part @ hi_f
        tol_r = _TOL + 1e-9 * np.abs(rhs_arr)
        if (np.any(lo_act[is_L] > rhs_arr[is_L] + tol_r[is_L])
                or np.any(hi_act[is_G] < rhs_arr[is_G] - tol_r[is_G])
                or np.any(lo_act[is_E] > rhs_arr[is_E] + tol_r[is_E])
                or np.any(hi_act[is_E] < rhs_arr[is_E] - tol_r[is_E])):
            continue
        if best is not None:
            obj_floor = float(obj_pos @ lo_f + obj_neg @ hi_f)
            if obj_floor >= best[0] - 1e-12 * max(1, abs(best[0])):
                continue
        res = engine.solve(work_lb, work_ub)
        if res.status != "optimal":
            continue
        if best is None or res.objective < best[0] - 1e-12 * max(1, abs(best[0])):
            best = (res.objective, assignment, res.x)
    if best is None:
        return _raise_all_infeasible(problem)

    x = best[2].copy()
    for k, j in enumerate(int_cols):
        x[j] = best[1][k]
    plan = plan_from_values(x, index, instance, problem)
    plan.objective = best[0] + instance.obj_offset
    violations = evaluate_schedule(problem, plan)
    if violations:
        raise OracleError("enumeration winner fails the independent evaluator:\n  "
                          + "\n  ".join(violations[:10]))
    plan.verified = True
    return plan


def _raise_all_infeasible(problem):
    raise OracleError(f"all integer assignments infeasible for {problem.name}")


# ---------------------------------------------------------------------------
# Greedy merit-order dispatch simulation

@dataclass
class DispatchResult:
    feasible: bool
    cost: Optional[float]
    plan: Optional[PlanSolution]
    reason: str = ""


def simulate_dispatch(capacities: dict, problem: PlanningProblem) -> DispatchResult:
    """Feasibility and cost of serving the problem with fixed capacities.

    ``capacities`` maps expansion units (new-diesel ids, 's', 'w', 'b', 'f',
    'el', 'q') to per-year installed capacity sequences (kW / kWh / kg);
    missing units are treated as absent.  Existing diesel comes from the
    catalog.  The produced schedule, when feasible, satisfies every
    operating rule checked by evaluate_schedule.
    """
    a, cat, sc = problem.assumptions, problem.catalog, problem.scenario
    Y, H = a.horizon_years, a.rep_hours
    b, h2 = cat.battery, cat.hydrogen

    def per_year(unit):
        arr = capacities.get(unit)
        if arr is None:
            return np.zeros(Y)
        arr = np.asarray(arr, dtype=float) * np.ones(Y)
        if np.any(np.diff(arr) < -1e-9):
            raise OracleError(f"{unit}: installed capacity must be non-decreasing")
        return arr

    existing = ([s for s in cat.diesel_existing]
                if TECH_EXISTING_DIESEL in sc.allowed_tech else [])
    new = ([s for s in cat.diesel_new]
           if TECH_NEW_DIESEL in sc.allowed_tech else [])
    inst = {unit: per_year(unit) for unit in
            [s.id for s in new] + ["s", "w", "b", "f", "el", "q"]}
    unit_size = {"w": cat.wind.rated_kw if cat.wind else 1.0,
                 "b": b.module_kwh if b else 1.0,
                 "f": h2.fc_kw if h2 else 1.0,
                 "el": h2.el_kw if h2 else 1.0,
                 "q": h2.tank_kg if h2 else 1.0}
    for s in new:
        unit_size[s.id] = s.rated_kw

    additions_capacity = {}
    additions = {}
    installed = {}
    for unit, arr in inst.items():
        if np.all(arr == 0) and unit not in ("s",):
            continue
        if unit == "s" and np.all(arr == 0) and cat.solar is None:
            continue
        adds = np.diff(np.concatenate([[0.0], arr]))
        additions_capacity[unit] = adds
        installed[unit] = arr.copy()
        if unit == "s":
            additions[unit] = adds.copy()
        else:
            counts = adds / unit_size[unit]
            if np.any(np.abs(counts - np.round(counts)) > 1e-6):
                raise OracleError(f"{unit}: capacity not a whole number of units")
            additions[unit] = np.round(counts)

    curves = {s.id: linearize_fuel_curve(s, a.fuel_segments) for s in existing + new}
    # merit order: cheapest full-load marginal cost (fuel + O&M) first
    def merit(spec):
        rate = _pw_value(curves[spec.id], spec.rated_kw)
        return ((rate * a.diesel_price_per_l + spec.om_cost_per_kwh * spec.rated_kw)
                / spec.rated_kw, spec.id)
    order = sorted(existing + new, key=merit)

    dispatch = {s.id: np.zeros((Y, H)) for s in existing + new}
    on_state = {s.id: np.zeros((Y, H)) for s in existing + new}
    fuel = {s.id: np.zeros((Y, H)) for s in existing + new}
    has_batt = "b" in installed
    has_h2 = all(u in installed for u in ("f", "el", "q"))
    batt_ch = np.zeros((Y, H)) if has_batt else None
    batt_dch = np.zeros((Y, H)) if has_batt else None
    batt_soc = np.zeros((Y, H)) if has_batt else None
    tank_soc = np.zeros((Y, H)) if has_h2 else None
    fc_p = np.zeros((Y, H)) if has_h2 else None
    el_p = np.zeros((Y, H)) if has_h2 else None
    if cat.solar and "s" in installed:
        dispatch["s"] = np.zeros((Y, H))
    if cat.wind and "w" in installed:
        dispatch["w"] = np.zeros((Y, H))

    life_left = {s.id: s.lifetime_h for s in existing + new}
    cycle_budget = (b.cycle_life * float(np.sum(additions_capacity.get("b", [0.0])))
                    if has_batt else 0.0)

    soc = b.soc0_frac * installed["b"][0] if has_batt else 0.0
    socq = h2.tank_min_frac * installed["q"][0] if has_h2 else 0.0

    def fail(reason):
        return DispatchResult(False, None, None, reason)

    for y in range(1, Y + 1):
        avail_left = {s.id: math.floor(H * (1 - a.maintenance_frac) + 1e-9)
                      for s in existing + new}
        cap_b = installed["b"][y - 1] if has_batt else 0.0
        cap_q = installed["q"][y - 1] if has_h2 else 0.0
        for h in range(1, H + 1):
            d = problem.profiles.load.values[h - 1] * (1 + a.load_growth) ** (y - 1)
            ps = pw = 0.0
            if "s" in dispatch:
                f_h = solar_unit_output(problem.profiles.irradiance.values[h - 1],
                                        problem.profiles.cell_temp.values[h - 1],
                                        cat.solar)
                ps = f_h * installed["s"][y - 1]
                dispatch["s"][y - 1, h - 1] = ps
            if "w" in dispatch:
                w_kw = wind_unit_output(problem.profiles.wind_speed.values[h - 1],
                                        cat.wind)
                pw = w_kw * installed["w"][y - 1] / cat.wind.rated_kw
                dispatch["w"][y - 1, h - 1] = pw

            if has_batt:
                batt_soc[y - 1, h - 1] = soc
            if has_h2:
                tank_soc[y - 1, h - 1] = socq

            # operating reserve is capacity-based and has no hourly recourse
            reserve = sum(s.rated_kw for s in existing)
            reserve += sum(inst[s.id][y - 1] for s in new)
            reserve += installed["f"][y - 1] if has_h2 else 0.0
            reserve += soc if has_batt else 0.0
            if reserve < (1 + a.reserve_load) * d + a.reserve_solar * ps \
                    + a.reserve_wind * pw - _TOL:
                return fail(f"reserve short at y{y} h{h}")

            net = d - ps - pw
            pch = pdch = pfc = pel = 0.0
            if net < -_TOL:
                surplus = -net
                if has_batt:
                    room = max(0.0, (cap_b - soc) / b.eta_ch)
                    take = min(surplus, (1 - b.dod_frac) / b.t_ch_h * cap_b, room,
                               max(0.0, cycle_budget))
                    if take >= 1.0:
                        pch = take
                        surplus -= take
                if surplus > _TOL and has_h2:
                    room = max(0.0, (h2.tank_max_frac * cap_q - socq)
                               * h2.hhv_kwh_per_kg * (1 + h2.compressor_load)
                               / h2.eta_el)
                    pel = min(surplus, installed["el"][y - 1], room)
                    surplus -= pel
                if surplus > _TOL:
                    return fail(f"unabsorbable renewable surplus at y{y} h{h}")
            elif net > _TOL:
                avail_dch = 0.0
                if has_batt:
                    avail_dch = min((1 - b.dod_frac) / b.t_dch_h * cap_b,
                                    max(0.0, (soc - b.dod_frac * cap_b) * b.eta_dch),
                                    max(0.0, cycle_budget))
                    if avail_dch < 1.0:
                        avail_dch = 0.0
                avail_fc = 0.0
                if has_h2:
                    avail_fc = min(installed["f"][y - 1],
                                   max(0.0, (socq - h2.tank_min_frac * cap_q)
                                       * h2.hhv_kwh_per_kg * h2.eta_fc))
                avail_ch = 0.0
                room_ch = 0.0
                if has_batt:
                    room_ch = max(0.0, (cap_b - soc) / b.eta_ch)
                    avail_ch = min((1 - b.dod_frac) / b.t_ch_h * cap_b, room_ch,
                                   max(0.0, cycle_budget))
                    if avail_ch < 1.0:
                        avail_ch = 0.0
                avail_el = 0.0
                if has_h2:
                    room_el = max(0.0, (h2.tank_max_frac * cap_q - socq)
                                  * h2.hhv_kwh_per_kg * (1 + h2.compressor_load)
                                  / h2.eta_el)
                    avail_el = min(installed["el"][y - 1], room_el)

                units = []
                if not sc.diesel_reserve_only:
                    for s in order:
                        if s in existing and _standby(s, y):
                            continue
                        if s in new and inst[s.id][y - 1] <= 0:
                            continue
                        if avail_left[s.id] < 1 or life_left[s.id] < a.days_per_month:
                            continue
                        units.append(s)

                # cheapest unit subset (fewest units, merit order) whose
                # dispatch window, stretched by storage, can reach net
                def cap_of(s):
                    return s.rated_kw if s in existing else inst[s.id][y - 1]

                chosen = None
                for size in range(0, len(units) + 1):
                    for combo in itertools.combinations(units, size):
                        smin = sum(s.min_load_frac * cap_of(s) for s in combo)
                        smax = sum(cap_of(s) for s in combo)
                        if (smin - avail_el - avail_ch <= net + _TOL
                                and net <= smax + avail_fc + avail_dch + _TOL):
                            chosen = combo
                            break
                    if chosen is not None:
                        break
                if chosen is None:
                    return fail(f"unservable demand at y{y} h{h}")
                smin = sum(s.min_load_frac * cap_of(s) for s in chosen)
                smax = sum(cap_of(s) for s in chosen)
                p_diesel = min(max(net, smin), smax)
                rest = net - p_diesel
                if rest > _TOL:
                    # shortfall: fuel cell first (no minimum), then battery
                    take = min(rest, avail_fc)
                    pfc = take
                    rest -= take
                    if _TOL < rest < 1.0 and avail_dch >= 1.0:
                        # battery cannot emit below 1 kW; rebalance onto it
                        if pfc >= rest:
                            pfc -= 1.0 - rest
                            rest = 1.0
                        elif p_diesel - (1.0 - rest) >= smin - _TOL:
                            p_diesel -= 1.0 - rest
                            rest = 1.0
                    if rest >= 1.0 - _TOL and avail_dch >= rest - _TOL:
                        pdch = min(max(rest, 1.0), avail_dch)
                        rest -= pdch
                    if rest > _TOL:
                        return fail(f"unserved demand at y{y} h{h}")
                elif rest < -_TOL:
                    # minimum-load excess: electrolizer first, then battery
                    excess = -rest
                    take = min(excess, avail_el)
                    pel = take
                    excess -= take
                    if _TOL < excess < 1.0 and avail_ch >= 1.0 and pel >= 1.0 - excess:
                        pel -= 1.0 - excess
                        excess = 1.0
                    if excess >= 1.0 - _TOL and avail_ch >= excess - _TOL:
                        pch = min(max(excess, 1.0), avail_ch)
                        excess -= pch
                    if excess > _TOL:
                        return fail(f"minimum-load excess unabsorbable at y{y} h{h}")
                # allocate p_diesel: minimum loads first, then merit order fill
                alloc = {}
                for s in chosen:
                    alloc[s.id] = s.min_load_frac * cap_of(s)
                remaining = p_diesel - sum(alloc.values())
                for s in chosen:
                    extra = min(remaining, cap_of(s) - alloc[s.id])
                    alloc[s.id] += extra
                    remaining -= extra
                    if remaining <= _TOL:
                        break
                for s in chosen:
                    dispatch[s.id][y - 1, h - 1] = alloc[s.id]
                    on_state[s.id][y - 1, h - 1] = 1.0
                    fuel[s.id][y - 1, h - 1] = _pw_value(curves[s.id], alloc[s.id])
                    avail_left[s.id] -= 1
                    life_left[s.id] -= a.days_per_month

            if has_batt:
                batt_ch[y - 1, h - 1] = pch
                batt_dch[y - 1, h - 1] = pdch
                cycle_budget -= pch + pdch
                soc = soc + b.eta_ch * pch - pdch / b.eta_dch
            if has_h2:
                fc_p[y - 1, h - 1] = pfc
                el_p[y - 1, h - 1] = pel
                socq = socq + h2.eta_el * pel / (h2.hhv_kwh_per_kg
                                                 * (1 + h2.compressor_load)) \
                    - pfc / (h2.hhv_kwh_per_kg * h2.eta_fc)

    plan = PlanSolution(
        objective=0.0, years=Y, hours=H,
        additions=additions, additions_capacity=additions_capacity,
        installed=installed, dispatch=dispatch, on_state=on_state, fuel_lph=fuel,
        el_consumption=el_p, batt_charge=batt_ch, batt_discharge=batt_dch,
        batt_soc=batt_soc, batt_ch_state=None if batt_ch is None
        else (batt_ch >= 1.0 - _TOL).astype(float),
        batt_dch_state=None if batt_dch is None
        else (batt_dch >= 1.0 - _TOL).astype(float),
        tank_soc=tank_soc,
        fingerprint=problem.fingerprint(), provenance=problem.provenance)
    if has_h2:
        plan.dispatch["f"] = fc_p
    violations = evaluate_schedule(problem, plan)
    if violations:
        return fail("greedy schedule rejected: " + "; ".join(violations[:5]))
    plan.verified = True
    cost = recompute_objective(plan, problem).total
    plan.objective = cost
    return DispatchResult(True, cost, plan)


def _pw_value(curve, p):
    if p <= 0:
        return 0.0
    if p > curve.breakpoints[-1] + 1e-9:
        return curve.slopes[-1] * p + curve.intercepts[-1]
    return curve.value(p)


# ---------------------------------------------------------------------------
# Randomized tiny-instance suite (seeded, replayable)

SUITE_SEED = 20240601


def tiny_suite(count: int = 20, seed: int = SUITE_SEED,
               spec: TinyInstanceSpec = TinyInstanceSpec()) -> list:
    """Seeded tiny planning problems whose induced models stay enumerable.

    Draw ranges keep big-M valid and demand mostly coverable; problems that
    build beyond the integer budget are redrawn, so the sequence is fully
    determined by the seed.  Every instance serializes through the normal
    problem-file path for replay.
    """
    rng = np.random.default_rng(seed)
    problems = []
    attempts = 0
    # the first slots force tech mixes so every constraint family appears
    # at least once across the suite, including the year-wrap storage rows
    forced = [("battery", "2y"), ("hydrogen", "2y"), ("new-diesel",),
              ("wind", "solar"), ("battery", "wind")]
    while len(problems) < count:
        attempts += 1
        if attempts > 200 * count:
            raise OracleError("tiny-suite generator failed to converge")
        force = forced[len(problems)] if len(problems) < len(forced) else None
        p = _draw_tiny(rng, spec, force)
        if p is None:
            continue
        try:
            instance, _ = build_model(p)
        except Exception:
            continue
        n_int = sum(1 for v in instance.vartype if v != "C")
        total = 1
        for j in range(instance.n_cols):
            if instance.vartype[j] != "C":
                total *= int(instance.col_ub[j] - instance.col_lb[j]) + 1
        if n_int > 14 or total > 40960:
            continue
        problems.append(p)
    return problems


def _draw_tiny(rng, spec: TinyInstanceSpec, force=None):
    years = int(rng.integers(1, spec.years + 1))
    hours = int(rng.integers(2, min(4, spec.hours) + 1))
    n_diesel = int(rng.integers(1, 3))
    with_batt = rng.random() < 0.35
    with_wind = rng.random() < 0.35
    with_solar = rng.random() < 0.3
    with_h2 = rng.random() < 0.12
    with_new = rng.random() < 0.15 and hours <= 3
    if force is not None:
        with_batt = "battery" in force
        with_wind = "wind" in force
        with_solar = "solar" in force
        with_h2 = "hydrogen" in force
        with_new = "new-diesel" in force and hours <= 3
        if "new-diesel" in force and not with_new:
            return None
        if "2y" in force:
            years = 2
            hours = 2
    if with_batt or with_h2 or with_new:
        n_diesel = 1
    if with_batt and with_h2:
        with_h2 = False  # joint storage blows the assignment budget

    diesel = []
    for i in range(n_diesel):
        rated = float(rng.integers(8, 40)) * 10.0
        a_coef = float(rng.choice([-3e-4, -1e-4, 3e-5, 1e-4]))
        b_coef = float(rng.uniform(0.2, 0.45))
        psi = float(rng.choice([0.3, 0.4]))
        c_coef = float(rng.uniform(0, 6.0))
        if a_coef * (psi * rated) ** 2 + b_coef * psi * rated + c_coef < 0:
            c_coef += abs(a_coef) * rated ** 2
        # "tight" lifetimes still admit full-horizon commitment of one unit
        lifetime = float(rng.choice([30.0 * hours * years + 30.0,
                                     30.0 * hours * years * 2.0, 1e5]))
        diesel.append(dict(id=f"e{i + 1}", rated_kw=rated, lifetime_h=lifetime,
                           fuel_a=a_coef, fuel_b=b_coef, fuel_c=c_coef,
                           min_load_frac=psi, om_cost_per_kwh=0.02))
    total_cap = sum(d["rated_kw"] for d in diesel)

    beta = float(rng.choice([0.05, 0.1]))
    # keep every hour above the largest single-unit minimum load and the
    # yearly peak inside the reserve headroom
    load_lo = 1.1 * max(d["min_load_frac"] * d["rated_kw"] for d in diesel)
    load_hi = 0.8 * total_cap / ((1 + beta) * (1.01) ** (years - 1))
    if load_lo >= load_hi:
        return None
    load = [round(float(rng.uniform(load_lo, load_hi)), 3) for _ in range(hours)]
    iration = [round(float(rng.uniform(0, 0.9)), 3) for _ in range(hours)]
    temp = [round(float(rng.uniform(-25, 20)), 2) for _ in range(hours)]
    wind = [round(float(rng.uniform(0, 11)), 3) for _ in range(hours)]

    diesel_new = []
    if with_new:
        rated = float(rng.integers(8, 20)) * 10.0
        diesel_new.append(dict(id="n1", rated_kw=rated, lifetime_h=1e5,
                               fuel_a=-1e-4, fuel_b=float(rng.uniform(0.2, 0.35)),
                               fuel_c=3.0 + 1e-4 * rated ** 2, min_load_frac=0.4,
                               om_cost_per_kwh=0.019,
                               capital_cost_per_kw=float(rng.uniform(200, 900))))

    doc = {
        "schema_version": 1,
        "name": "tiny",
        "provenance": "synthetic",
        "diesel_existing": diesel,
        "diesel_new": diesel_new,
        "assumptions": {
            "discount_rate": float(rng.choice([0.05, 0.08])),
            "horizon_years": years,
            "days_per_month": 30,
            "rep_hours": hours,
            "reserve_load": beta,
            "reserve_solar": 0.25,
            "reserve_wind": 0.5,
            "load_growth": 0.01,
            "diesel_price_per_l": float(rng.uniform(1.5, 2.5)),
            "maintenance_frac": (float(rng.choice([0.0, 1.0 / hours]))
                                 if n_diesel > 1 else 0.0),
            "big_m": 1e5,
            "res_invest_window": [1, years],
            "diesel_invest_window": [1, years],
            "fuel_segments": int(rng.choice([1, 1, 2, 3])),
            "emission_factor_kg_per_l": 2.68,
            "capacity_cap_factor": 1.2,
        },
        "profiles": {
            "load_kw": load,
            "irradiance_kw_m2": iration,
            "cell_temp_c": temp,
            "wind_speed_m_s": wind,
        },
        "scenarios": {
            "tiny": {
                "allowed_tech": ["existing-diesel"]
                + (["new-diesel"] if with_new else [])
                + (["battery"] if with_batt else [])
                + (["wind"] if with_wind else [])
                + (["solar"] if with_solar else [])
                + (["hydrogen"] if with_h2 else []),
            },
        },
    }
    if with_batt:
        # module sized near peak demand so the count range stays enumerable
        kwh = float(round(load_hi * 4.0))
        doc["battery"] = dict(module_kwh=kwh, peak_kw=0.8 / 4.0 * kwh,
                              capital_cost_per_kwh=float(rng.uniform(30, 400)),
                              om_cost_per_kwh=0.007, eta_ch=0.95, eta_dch=0.95,
                              soc0_frac=0.5, dod_frac=0.2, t_ch_h=4.0, t_dch_h=4.0,
                              cycle_life=3000.0)
    if with_wind:
        doc["wind"] = dict(rated_kw=100.0, cut_in=2.5, nominal=7.5, cut_out=25.0,
                           capital_cost_per_kw=float(rng.uniform(800, 8000)),
                           om_cost_per_kwh=0.036, lifetime_y=20.0,
                           curve=[[2.5, 5.0, 12.0, -30.0], [5.0, 7.5, 14.0, -40.0],
                                  [7.5, 25.0, 0.0, 100.0]])
    if with_solar:
        doc["solar"] = dict(capital_cost_per_kw=float(rng.uniform(1000, 6000)),
                            om_cost_per_kwh=0.014, temp_coeff_per_c=-0.041,
                            derating=0.98, lifetime_y=20.0, tau_stc_c=25.0,
                            g_stc_kw_m2=1.0)
    if with_h2:
        # unit sizes near peak demand keep the count ranges enumerable
        fc = float(round(load_hi))
        doc["hydrogen"] = dict(fc_kw=fc, el_kw=round(1.2 * fc),
                               tank_kg=float(round(load_hi * 12 / 39.4)),
                               fc_cost_per_unit=400.0 * fc,
                               el_cost_per_unit=900.0 * fc,
                               tank_cost_per_unit=300.0 * fc, fc_om_per_h=2.0,
                               el_om_per_y=194.0, tank_om_per_y=1200.0,
                               eta_fc=0.6, eta_el=0.7, hhv_kwh_per_kg=39.4,
                               compressor_load=0.02, tank_max_frac=0.95,
                               tank_min_frac=0.15, fc_lifetime_h=50000.0,
                               el_lifetime_y=15.0, tank_lifetime_y=25.0)
    try:
        problem = problem_from_dict(doc, "tiny", name=f"tiny-{years}y{hours}h")
    except Exception:
        return None
    if any(f.severity == "error" for f in validate_problem(problem)):
        return None
    return problem
