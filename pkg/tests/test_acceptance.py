"""Acceptance gate: one test per criterion, each printing a PASS line.

Full-scale reproduction of the study numbers is out of reach at desk scale
(the bundled profiles are figure-level reconstructions and the 20-year
model exceeds the embedded solver), so acceptance combines exact property
suites, oracle equivalence, and directional 5-year runs.  The reduced
Sanikiluaq runs go through the HiGHS bridge -- the "exported solution,
independently verified" route -- with every returned solution checked at
1e-6 before any cost claim is made.
"""

import dataclasses
import os
import time
from concurrent.futures import ProcessPoolExecutor

import pytest

from microplan.catalog import builtin_sanikiluaq, reduce_problem
from microplan.model import build_model, equation_coverage
from microplan.oracle import (
    OracleError,
    SUITE_SEED,
    enumerate_optimum,
    tiny_suite,
)
from microplan.profiles import fuel_rate, linearize_fuel_curve, solar_unit_output, wind_unit_output
from microplan.solve import SolveOptions, check_feasibility, solve

RES_SCENARIOS = ("1A", "1B", "2A", "2B", "3A", "3B", "4A", "4B")


def _ok(criterion, detail):
    print(f"ACCEPTANCE {criterion}: PASS - {detail}")


# -- Criterion 1: oracle equivalence on the seeded tiny suite ---------------

def test_criterion_1_oracle_equivalence():
    suite = tiny_suite(count=20, seed=SUITE_SEED)
    assert len(suite) >= 20
    worst = 0.0
    feasible = 0
    for p in suite:
        t0 = time.monotonic()
        instance, _ = build_model(p)
        try:
            enum_obj = enumerate_optimum(p).objective
        except OracleError:
            enum_obj = None
        sol = solve(instance, SolveOptions(mip_gap=0.0))
        elapsed = time.monotonic() - t0
        worst = max(worst, elapsed)
        assert elapsed < 60.0, f"{p.name} took {elapsed:.1f}s"
        if enum_obj is None or sol.objective is None:
            assert enum_obj is None and sol.objective is None
        else:
            feasible += 1
            assert abs(sol.objective - enum_obj) <= 1e-6 * max(1.0, abs(enum_obj))
    _ok(1, f"20/20 embedded = enumeration within 1e-6 relative "
           f"({feasible} feasible, worst instance {worst:.1f}s)")


# -- Criterion 2: verifier on all optima + equation-tag coverage ------------

def test_criterion_2_verifier_and_tag_coverage():
    suite = tiny_suite(count=20, seed=SUITE_SEED)
    labels = set()
    solved = 0
    for p in suite:
        instance, _ = build_model(p)
        labels.update(instance.row_labels)
        sol = solve(instance, SolveOptions(mip_gap=0.0))
        if sol.status == "optimal":
            solved += 1
            report = check_feasibility(instance, sol.x, 1e-6)
            assert report.ok, f"{p.name}: {report.summary()}"
    cover = equation_coverage(labels)
    missing = [tag for tag, got in cover.items() if not got]
    assert missing == [], f"uncovered tags: {missing}"
    assert cover["Eq22"], "complementarity must be realized by Eq23-Eq25"
    _ok(2, f"{solved} optimal solutions verified at 1e-6; "
           f"row tags Eq2-Eq31 all covered (Eq22 via its linear substitutes)")


# -- Criterion 3: formula spot checks ---------------------------------------

def test_criterion_3_formula_spot_checks():
    cat = builtin_sanikiluaq("1A").catalog
    assert abs(solar_unit_output(1.0, 25.0, cat.solar) - 0.98) <= 1e-6
    assert abs(wind_unit_output(10.0, cat.wind) - 250.0) <= 1e-6
    g5 = cat.diesel_existing[4]
    assert abs(fuel_rate(g5, 500.0, True) - 123.05) <= 1e-6
    h2 = cat.hydrogen
    el_step = h2.el_kw * h2.eta_el / (h2.hhv_kwh_per_kg * (1 + h2.compressor_load))
    fc_step = h2.fc_kw / (h2.hhv_kwh_per_kg * h2.eta_fc)
    assert abs(el_step - 330 * 0.7 / (39.4 * 1.02)) <= 1e-6
    assert abs(fc_step - 250 / (39.4 * 0.6)) <= 1e-6
    # the published 4-decimal roundings of the same quantities
    assert abs(el_step - 5.7479) <= 1e-4
    assert abs(fc_step - 10.5753) <= 1e-4
    _ok(3, f"solar 0.98, wind 250 kW, gen5 123.05 l/h, tank steps "
           f"+{el_step:.6f}/-{fc_step:.6f} kg/h all within 1e-6 of their formulas")


# -- Criterion 4: piecewise fidelity -----------------------------------------

def test_criterion_4_piecewise_fidelity():
    cat = builtin_sanikiluaq("1A").catalog
    worst = 0.0
    for spec in cat.diesel_existing + cat.diesel_new:
        curve = linearize_fuel_curve(spec, 3)
        rated = fuel_rate(spec, spec.rated_kw, True)
        for k in range(curve.segments):
            for bp in (curve.breakpoints[k], curve.breakpoints[k + 1]):
                assert abs(curve.value(bp) - fuel_rate(spec, bp, True)) <= 1e-9
            mid = 0.5 * (curve.breakpoints[k] + curve.breakpoints[k + 1])
            err = abs(curve.value(mid) - fuel_rate(spec, mid, True)) / rated
            worst = max(worst, err)
            assert err <= 0.02
    _ok(4, f"3-segment curves exact at breakpoints; worst midpoint error "
           f"{100 * worst:.3f}% of the rated-power rate (limit 2%)")


# -- Criterion 5: directional reproduction on reduced Sanikiluaq -------------

def _five_year(sid):
    p = reduce_problem(builtin_sanikiluaq(sid), years=5)
    return dataclasses.replace(
        p, assumptions=dataclasses.replace(p.assumptions, fuel_segments=1))


def _solve_five_year(sid):
    from microplan.report import cost_breakdown
    from microplan.solve import extract_plan
    problem = _five_year(sid)
    instance, index = build_model(problem)
    sol = solve(instance, SolveOptions(mip_gap=0.01, backend="highs",
                                       time_limit=300))
    if sol.x is None:
        return sid, None
    verified = check_feasibility(instance, sol.x, 1e-6)
    plan = extract_plan(sol, index, problem)
    cost = cost_breakdown(plan, problem)
    return sid, {
        "status": sol.status, "gap": sol.gap, "verified": verified.ok,
        "total": cost.total_npc, "om": cost.om_npc,
        "litres": cost.litres_total, "objective": sol.objective,
    }


@pytest.mark.slow
def test_criterion_5_directional_reduced_sanikiluaq():
    t0 = time.monotonic()
    order = ("BAU",) + RES_SCENARIOS
    with ProcessPoolExecutor(max_workers=2) as pool:
        results = dict(pool.map(_solve_five_year, order))
    wall = time.monotonic() - t0

    for sid in order:
        assert results[sid] is not None, f"{sid}: no incumbent within budget"
        assert results[sid]["verified"], f"{sid}: solution failed verification"
    bau = results["BAU"]

    # (a) reserve-only scenarios burn zero diesel: 100% fuel and GHG reduction
    for sid in ("4A", "4B"):
        assert results[sid]["litres"] <= 1e-6, f"{sid} burned diesel"
    # (b) every renewable scenario undercuts the BAU O&M NPC
    for sid in RES_SCENARIOS:
        assert results[sid]["om"] < bau["om"], (
            f"{sid} O&M {results[sid]['om']:,.0f} >= BAU {bau['om']:,.0f}")
    # (c) the all-technology scenario beats BAU on total NPC
    assert results["1A"]["total"] < bau["total"]

    assert wall <= 1800, f"runtime {wall:.0f}s exceeds the 30-minute budget"
    om_red = [100 * (1 - results[sid]["om"] / bau["om"]) for sid in RES_SCENARIOS]
    cost_red_1a = 100 * (1 - results["1A"]["total"] / bau["total"])
    _ok(5, f"4A/4B at 0 litres; O&M reductions {min(om_red):.0f}..{max(om_red):.0f}%; "
           f"1A total cost -{cost_red_1a:.1f}% vs BAU; wall {wall:.0f}s")


# -- Criterion 6 (optional, not gating): full 20-year export -----------------

def test_criterion_6_full_scale_export(tmp_path):
    from microplan.mpsio import write_mps
    problem = builtin_sanikiluaq("1A")
    instance, _ = build_model(problem)
    path = tmp_path / "sanikiluaq_1A_20y.mps"
    write_mps(instance, path)
    assert path.stat().st_size > 1_000_000
    assert instance.n_cols > 50_000
    if not os.environ.get("MICROPLAN_FULL"):
        _ok(6, f"20-year 1A exported ({instance.n_cols} columns); external solve "
               "documented, not gating")
        return
    # opt-in: solve the full model externally (HiGHS bridge) and verify
    sol = solve(instance, SolveOptions(mip_gap=0.02, backend="highs",
                                       time_limit=3600))
    assert sol.x is not None
    assert check_feasibility(instance, sol.x, 1e-6).ok
    _ok(6, "full 20-year solve verified at 1e-6")


# -- Criterion 7: determinism -----------------------------------------------

def test_criterion_7_determinism(tmp_path):
    from microplan.mpsio import write_mps
    from microplan.report import emit_outputs, run_scenario

    p = reduce_problem(builtin_sanikiluaq("BAU"), years=1, hours=4)
    p = dataclasses.replace(
        p, assumptions=dataclasses.replace(p.assumptions, fuel_segments=2))
    instance, _ = build_model(p)
    m1, m2 = tmp_path / "a.mps", tmp_path / "b.mps"
    write_mps(instance, m1)
    write_mps(instance, m2)
    assert m1.read_bytes() == m2.read_bytes()

    meta = {"name": p.name, "fingerprint": p.fingerprint(),
            "provenance": p.provenance}
    outs = []
    for tag in ("r1", "r2"):
        res = run_scenario(p, SolveOptions(mip_gap=0.0))
        emit_outputs([res], meta, tmp_path / tag, figures=False)
        outs.append(tmp_path / tag)
    same = []
    for rel in ("BAU/additions.csv", "BAU/cost_breakdown.csv", "BAU/dispatch_y1.csv"):
        b1 = (outs[0] / rel).read_bytes()
        b2 = (outs[1] / rel).read_bytes()
        assert b1 == b2, f"{rel} differs between identical runs"
        same.append(rel)
    _ok(7, f"byte-identical MPS export and {len(same)} CSVs across repeated runs")
