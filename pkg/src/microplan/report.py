"""Result artifacts: NPC breakdowns, reductions vs BAU, and file emission.

Every run writes per-scenario CSVs (additions by year, cost breakdown, one
dispatch file per year) plus a JSON summary carrying run metadata, solver
options, and the data-provenance flag of the profiles.  CSV output is
deterministic: identical inputs and options give byte-identical files.
Litres are always re-derived from the exact quadratic fuel curves, so the
reported fuel cost can differ from the solver objective by at most the
piecewise-linearization error.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .catalog import (
    TECH_BATTERY,
    TECH_EXISTING_DIESEL,
    TECH_HYDROGEN,
    TECH_NEW_DIESEL,
    TECH_SOLAR,
    TECH_WIND,
    PlanningProblem,
)
from .model import PlanSolution, build_model, npc_capital
from .profiles import write_profiles_csv
from .solve import SolveOptions, extract_plan, solve

TECH_LABELS = (TECH_EXISTING_DIESEL, TECH_NEW_DIESEL, TECH_SOLAR, TECH_WIND,
               TECH_BATTERY, TECH_HYDROGEN)


class ReportError(ValueError):
    """Unusable inputs for report generation."""


@dataclass
class CostReport:
    capital_npc: float
    fuel_npc: float
    om_npc: float
    total_npc: float
    litres_total: float
    emissions_kg: float
    per_tech: dict            # tech -> {capital, fuel, om}
    per_year: dict            # component -> [per-year NPC]


@dataclass
class ScenarioReport:
    scenario_id: str
    cost: CostReport
    additions: dict           # unit -> per-year counts (solar: kW)
    fingerprint: str
    provenance: str
    reductions: Optional[dict] = None   # vs BAU, filled by compare()


def emissions(litres: float, factor: float) -> float:
    """kg CO2-equivalent from diesel litres burned."""
    if litres < 0:
        raise ReportError(f"negative litres: {litres}")
    return litres * factor


def cost_breakdown(plan: PlanSolution, problem: PlanningProblem) -> CostReport:
    """Term-wise NPC of a verified plan, litres from the exact fuel quadratic."""
    if not plan.verified:
        raise ReportError("plan has not passed feasibility verification")
    a, cat, sc = problem.assumptions, problem.catalog, problem.scenario
    Y, H = plan.years, plan.hours
    lam = a.days_per_month
    disc = [1.0 / (1.0 + a.discount_rate) ** (y - 1) for y in range(1, Y + 1)]
    specs = {s.id: s for s in cat.diesel_existing + cat.diesel_new}
    new_ids = {s.id for s in cat.diesel_new}

    def tech_of(unit):
        if unit in new_ids:
            return TECH_NEW_DIESEL
        if unit in specs:
            return TECH_EXISTING_DIESEL
        return {"s": TECH_SOLAR, "w": TECH_WIND, "b": TECH_BATTERY,
                "f": TECH_HYDROGEN, "el": TECH_HYDROGEN, "q": TECH_HYDROGEN}[unit]

    per_tech = {t: {"capital": 0.0, "fuel": 0.0, "om": 0.0} for t in TECH_LABELS}
    per_year = {"capital": [0.0] * Y, "fuel": [0.0] * Y, "om": [0.0] * Y}

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

    for unit, caps in plan.additions_capacity.items():
        for y in range(1, Y + 1):
            val = npc_capital(capital_unit[unit], caps[y - 1], y, a.discount_rate)
            per_tech[tech_of(unit)]["capital"] += val
            per_year["capital"][y - 1] += val
    if (sc.el_replacement_year is not None and sc.el_replacement_year <= Y
            and cat.hydrogen and TECH_HYDROGEN in sc.allowed_tech):
        val = cat.hydrogen.el_cost_per_unit * disc[sc.el_replacement_year - 1]
        per_tech[TECH_HYDROGEN]["capital"] += val
        per_year["capital"][sc.el_replacement_year - 1] += val

    litres = 0.0
    for uid, power in plan.dispatch.items():
        if uid in specs:
            spec = specs[uid]
            on = plan.on_state[uid]
            for y in range(Y):
                for h in range(H):
                    if on[y, h] < 0.5:
                        continue
                    p = float(power[y, h])
                    rate = spec.fuel_at(p)
                    litres += lam * rate
                    fuel_val = lam * a.diesel_price_per_l * rate * disc[y]
                    om_val = lam * spec.om_cost_per_kwh * p * disc[y]
                    per_tech[tech_of(uid)]["fuel"] += fuel_val
                    per_tech[tech_of(uid)]["om"] += om_val
                    per_year["fuel"][y] += fuel_val
                    per_year["om"][y] += om_val
        elif uid == "f" and cat.hydrogen:
            rate = cat.hydrogen.fc_om_per_h / cat.hydrogen.fc_kw
            for y in range(Y):
                val = lam * rate * float(np.sum(power[y])) * disc[y]
                per_tech[TECH_HYDROGEN]["om"] += val
                per_year["om"][y] += val

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
                val = coeff * plan.installed[unit][y] * disc[y]
                per_tech[tech_of(unit)]["om"] += val
                per_year["om"][y] += val

    capital = sum(t["capital"] for t in per_tech.values())
    fuel = sum(t["fuel"] for t in per_tech.values())
    om = sum(t["om"] for t in per_tech.values())
    return CostReport(
        capital_npc=capital, fuel_npc=fuel, om_npc=om,
        total_npc=capital + fuel + om,
        litres_total=litres,
        emissions_kg=emissions(litres, a.emission_factor_kg_per_l),
        per_tech=per_tech, per_year=per_year)


def scenario_report(plan: PlanSolution, problem: PlanningProblem) -> ScenarioReport:
    return ScenarioReport(
        scenario_id=problem.scenario.id,
        cost=cost_breakdown(plan, problem),
        additions={unit: list(map(float, arr)) for unit, arr in plan.additions.items()},
        fingerprint=plan.fingerprint,
        provenance=plan.provenance)


def _reduction_pct(base: float, value: float) -> float:
    if base == 0:
        return 0.0
    return 100.0 * (base - value) / base


def compare(reports: list, bau: ScenarioReport) -> list:
    """Per-scenario percentage reductions versus BAU (negative = increase)."""
    rows = []
    for rep in sorted(reports, key=lambda r: r.scenario_id):
        if rep.fingerprint != bau.fingerprint:
            raise ReportError(f"scenario {rep.scenario_id} was produced from a "
                              "different problem than the BAU report")
        red = {
            "total_cost_pct": _reduction_pct(bau.cost.total_npc, rep.cost.total_npc),
            "om_pct": _reduction_pct(bau.cost.om_npc, rep.cost.om_npc),
            "fuel_pct": _reduction_pct(bau.cost.fuel_npc, rep.cost.fuel_npc),
            "ghg_pct": _reduction_pct(bau.cost.emissions_kg, rep.cost.emissions_kg),
        }
        rep.reductions = red
        rows.append({"scenario": rep.scenario_id, **red})
    return rows


# ---------------------------------------------------------------------------
# Orchestration

@dataclass
class RunResult:
    scenario_id: str
    status: str
    backend: str
    objective: Optional[float] = None
    gap: Optional[float] = None
    node_count: int = 0
    runtime_s: float = 0.0
    plan: Optional[PlanSolution] = None
    report: Optional[ScenarioReport] = None
    problem: Optional[PlanningProblem] = None
    verified: bool = False
    error: str = ""


def run_scenario(problem: PlanningProblem, opts: SolveOptions) -> RunResult:
    """Build, solve, verify, and report one scenario; never raises on infeasibility."""
    t0 = time.monotonic()
    sid = problem.scenario.id
    try:
        instance, index = build_model(problem)
        solution = solve(instance, opts)
        if solution.x is None:
            return RunResult(sid, solution.status, opts.backend,
                             runtime_s=time.monotonic() - t0, problem=problem)
        plan = extract_plan(solution, index, problem)
        rep = scenario_report(plan, problem)
        return RunResult(sid, solution.status, opts.backend,
                         objective=solution.objective, gap=solution.gap,
                         node_count=solution.node_count,
                         runtime_s=time.monotonic() - t0, plan=plan, report=rep,
                         problem=problem, verified=plan.verified)
    except Exception as exc:  # surfaced in the summary and exit code
        return RunResult(sid, "error", opts.backend,
                         runtime_s=time.monotonic() - t0, problem=problem,
                         error=str(exc))


# ---------------------------------------------------------------------------
# File emission

def _write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(row)


def emit_outputs(results: list, problem_meta: dict, outdir, *,
                 options_meta: Optional[dict] = None, figures: bool = True) -> dict:
    """Write per-scenario CSVs, the reductions table, figures, and summary.json.

    Returns {"summary": path, "scenarios": {sid: dir}, "reductions": path|None}.
    """
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    written = {"scenarios": {}, "reductions": None}
    summary = {
        "tool": "microplan",
        "version": __version__,
        "schema_version": 1,
        "problem": problem_meta,
        "options": options_meta or {},
        "scenarios": {},
    }

    results = sorted(results, key=lambda r: r.scenario_id)
    for res in results:
        sdir = out / res.scenario_id
        sdir.mkdir(parents=True, exist_ok=True)
        written["scenarios"][res.scenario_id] = str(sdir)
        entry = {
            "status": res.status,
            "backend": res.backend,
            "objective": res.objective,
            "gap": res.gap,
            "node_count": res.node_count,
            "runtime_s": round(res.runtime_s, 3),
            "verified": res.verified,
            "provenance": problem_meta.get("provenance", ""),
        }
        if res.error:
            entry["error"] = res.error
        if res.plan is not None:
            _emit_scenario(res, sdir, problem_meta, figures)
            rep = res.report
            entry["cost"] = {
                "capital_npc": rep.cost.capital_npc,
                "fuel_npc": rep.cost.fuel_npc,
                "om_npc": rep.cost.om_npc,
                "total_npc": rep.cost.total_npc,
                "litres_total": rep.cost.litres_total,
                "emissions_kg": rep.cost.emissions_kg,
            }
            entry["additions"] = res.report.additions
            entry["fingerprint"] = rep.fingerprint
        summary["scenarios"][res.scenario_id] = entry

    solved = [r.report for r in results if r.report is not None]
    bau = next((r.report for r in results
                if r.report is not None and r.scenario_id == "BAU"), None)
    if bau is not None and len(solved) > 1:
        rows = compare([r for r in solved if r.scenario_id != "BAU"], bau)
        path = out / "reductions.csv"
        _write_csv(path, ["scenario", "total_cost_pct", "om_pct", "fuel_pct", "ghg_pct"],
                   [[r["scenario"], f"{r['total_cost_pct']:.2f}", f"{r['om_pct']:.2f}",
                     f"{r['fuel_pct']:.2f}", f"{r['ghg_pct']:.2f}"] for r in rows])
        written["reductions"] = str(path)
        summary["reductions"] = {r["scenario"]: {k: v for k, v in r.items()
                                                 if k != "scenario"} for r in rows}
        if figures:
            from . import figures as figmod
            figmod.plot_reductions(rows, out / "reductions.png")

    spath = out / "summary.json"
    with open(spath, "w") as f:
        json.dump(summary, f, indent=1, sort_keys=True)
        f.write("\n")
    written["summary"] = str(spath)
    return written


def _emit_scenario(res: RunResult, sdir: Path, problem_meta: dict, figures: bool):
    plan, rep = res.plan, res.report
    meta = {
        "scenario": res.scenario_id,
        "provenance": problem_meta.get("provenance", ""),
        "schema": "microplan-dispatch-v1",
    }

    units = sorted(plan.additions)
    rows = []
    for y in range(plan.years):
        row = [y + 1]
        for unit in units:
            row.append(repr(float(plan.additions[unit][y])))
            row.append(repr(float(plan.installed[unit][y])))
        rows.append(row)
    header = ["year"]
    for unit in units:
        header += [f"add_{unit}", f"installed_{unit}"]
    _write_csv(sdir / "additions.csv", header, rows)

    tech_rows = []
    for tech in TECH_LABELS:
        t = rep.cost.per_tech[tech]
        tech_rows.append([tech, repr(t["capital"]), repr(t["fuel"]), repr(t["om"]),
                          repr(t["capital"] + t["fuel"] + t["om"])])
    tech_rows.append(["total", repr(rep.cost.capital_npc), repr(rep.cost.fuel_npc),
                      repr(rep.cost.om_npc), repr(rep.cost.total_npc)])
    tech_rows.append(["litres_total", repr(rep.cost.litres_total), "", "", ""])
    tech_rows.append(["emissions_kg", repr(rep.cost.emissions_kg), "", "", ""])
    _write_csv(sdir / "cost_breakdown.csv",
               ["component", "capital_npc", "fuel_npc", "om_npc", "total_npc"],
               tech_rows)

    growth = res.problem.assumptions.load_growth if res.problem else 0.0
    base_load = (np.asarray(res.problem.profiles.load.values)
                 if res.problem else np.zeros(plan.hours))
    for y in range(plan.years):
        columns = [("load", "kW", base_load * (1 + growth) ** y)]
        for uid in sorted(plan.dispatch):
            columns.append((f"P_{uid}", "kW", plan.dispatch[uid][y]))
        if plan.el_consumption is not None:
            columns.append(("P_el", "kW", plan.el_consumption[y]))
        if plan.batt_charge is not None:
            columns.append(("batt_charge", "kW", plan.batt_charge[y]))
            columns.append(("batt_discharge", "kW", plan.batt_discharge[y]))
            columns.append(("batt_soc", "kWh", plan.batt_soc[y]))
        if plan.tank_soc is not None:
            columns.append(("tank_soc", "kg", plan.tank_soc[y]))
        write_profiles_csv(sdir / f"dispatch_y{y + 1}.csv", columns,
                           meta={**meta, "year": y + 1})

    if figures:
        from . import figures as figmod
        fdir = sdir / "figures"
        fdir.mkdir(exist_ok=True)
        figmod.plot_additions(plan, fdir / "additions.png")
        figmod.plot_cost_breakdown(rep, fdir / "cost_breakdown.png")
        figmod.plot_dispatch(plan, res.problem, min(plan.years, 10),
                             fdir / "dispatch.png")
