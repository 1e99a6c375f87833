import dataclasses
import json
from pathlib import Path

import pytest

from microplan.catalog import builtin_sanikiluaq, reduce_problem
from microplan.model import recompute_objective
from microplan.profiles import read_profiles_csv
from microplan.report import (
    ReportError,
    compare,
    cost_breakdown,
    emissions,
    emit_outputs,
    run_scenario,
)
from microplan.solve import SolveOptions


def tiny(sid="BAU", years=1, hours=2, segments=1):
    p = reduce_problem(builtin_sanikiluaq(sid), years=years, hours=hours)
    return dataclasses.replace(
        p, assumptions=dataclasses.replace(p.assumptions, fuel_segments=segments))


@pytest.fixture(scope="module")
def bau_run():
    p = tiny("BAU", years=1, hours=2)
    return p, run_scenario(p, SolveOptions(mip_gap=0.0))


@pytest.fixture(scope="module")
def mixed_run():
    p = tiny("1B", years=1, hours=4)
    return p, run_scenario(p, SolveOptions(mip_gap=0.001, backend="highs"))


def test_emissions():
    assert emissions(0.0, 2.68) == 0.0
    assert emissions(1000.0, 2.68) == pytest.approx(2680.0, abs=1e-12)
    assert emissions(123.0, 0.0) == 0.0
    with pytest.raises(ReportError):
        emissions(-1.0, 2.68)


def test_cost_breakdown_consistency(bau_run):
    p, res = bau_run
    assert res.status == "optimal"
    rep = res.report.cost
    assert rep.capital_npc + rep.fuel_npc + rep.om_npc == pytest.approx(
        rep.total_npc, rel=1e-9)
    assert rep.litres_total >= 0
    assert rep.emissions_kg == pytest.approx(
        rep.litres_total * p.assumptions.emission_factor_kg_per_l, rel=1e-12)
    rec = recompute_objective(res.plan, p)
    assert rep.total_npc == pytest.approx(rec.total_exact_fuel, rel=1e-9)
    # piecewise objective sits within the linearization tolerance
    assert rep.total_npc == pytest.approx(res.objective, rel=0.05)
    assert sum(rep.per_year["fuel"]) == pytest.approx(rep.fuel_npc, rel=1e-9)


def test_cost_breakdown_requires_verified_plan(bau_run):
    p, res = bau_run
    plan = dataclasses.replace(res.plan, verified=False)
    with pytest.raises(ReportError, match="verif"):
        cost_breakdown(plan, p)


def test_compare_rows(bau_run):
    p, res = bau_run
    bau = res.report
    cheaper = dataclasses.replace(
        bau, scenario_id="X",
        cost=dataclasses.replace(bau.cost,
                                 total_npc=0.8 * bau.cost.total_npc,
                                 litres_total=0.0, emissions_kg=0.0,
                                 fuel_npc=0.0))
    rows = compare([cheaper], bau)
    (row,) = rows
    assert row["total_cost_pct"] == pytest.approx(20.0, abs=1e-9)
    assert row["fuel_pct"] == 100.0
    assert row["ghg_pct"] == 100.0
    same = compare([dataclasses.replace(bau, scenario_id="SELF")], bau)
    assert same[0]["total_cost_pct"] == 0.0
    assert same[0]["ghg_pct"] == 0.0


def test_compare_fingerprint_mismatch(bau_run):
    _, res = bau_run
    other = dataclasses.replace(res.report, scenario_id="Y", fingerprint="beef")
    with pytest.raises(ReportError, match="different problem"):
        compare([other], res.report)


def test_ghg_tracks_fuel_exactly(mixed_run):
    p, res = mixed_run
    # reductions in GHG equal reductions in litres by construction
    bau_p = tiny("BAU", years=1, hours=4)
    bau = run_scenario(bau_p, SolveOptions(mip_gap=0.0, backend="highs"))
    rows = compare([res.report], bau.report)
    litres_red = 100 * (1 - res.report.cost.litres_total
                        / bau.report.cost.litres_total)
    assert rows[0]["ghg_pct"] == pytest.approx(litres_red, abs=1e-9)


def test_reductions_invariant_to_emission_factor_and_currency(bau_run):
    p, res = bau_run
    bau = res.report
    scen = dataclasses.replace(
        bau, scenario_id="S",
        cost=dataclasses.replace(bau.cost, total_npc=0.5 * bau.cost.total_npc,
                                 om_npc=0.25 * bau.cost.om_npc))
    base = compare([scen], bau)[0]

    def scale_money(c, k):
        return dataclasses.replace(c, capital_npc=k * c.capital_npc,
                                   fuel_npc=k * c.fuel_npc, om_npc=k * c.om_npc,
                                   total_npc=k * c.total_npc)

    def scale_emissions(c, k):
        return dataclasses.replace(c, emissions_kg=k * c.emissions_kg)

    # uniform currency rescale leaves the cost percentages unchanged
    money = compare([dataclasses.replace(scen, cost=scale_money(scen.cost, 7))],
                    dataclasses.replace(bau, cost=scale_money(bau.cost, 7)))[0]
    for key in ("total_cost_pct", "om_pct", "fuel_pct"):
        assert money[key] == pytest.approx(base[key], rel=1e-12)
    # a different emission factor leaves the GHG percentage unchanged
    ghg = compare([dataclasses.replace(scen, cost=scale_emissions(scen.cost, 3))],
                  dataclasses.replace(bau, cost=scale_emissions(bau.cost, 3)))[0]
    assert ghg["ghg_pct"] == pytest.approx(base["ghg_pct"], rel=1e-12)


def test_emit_outputs_structure(mixed_run, tmp_path):
    p, res = mixed_run
    meta = {"name": p.name, "fingerprint": p.fingerprint(),
            "provenance": p.provenance, "years": 1, "rep_hours": 4}
    written = emit_outputs([res], meta, tmp_path / "out", figures=True)
    sdir = Path(written["scenarios"]["1B"])
    assert (sdir / "additions.csv").exists()
    assert (sdir / "cost_breakdown.csv").exists()
    disp = sdir / "dispatch_y1.csv"
    cols, filemeta = read_profiles_csv(disp)
    assert filemeta["provenance"] == "digitized-approximate"
    names = [name for name, _, _ in cols]
    assert "P_el" in names            # electrolizer consumption column
    assert "batt_soc" in names
    assert all(len(values) == 4 for _, _, values in cols)
    # emitted dispatch values re-ingest bit-for-bit
    by_name = {name: values for name, unit, values in cols}
    fc = res.plan.dispatch["f"][0]
    assert by_name["P_f"] == tuple(float(v) for v in fc)
    assert (sdir / "figures" / "dispatch.png").stat().st_size > 0
    assert (sdir / "figures" / "additions.png").stat().st_size > 0
    summary = json.loads(Path(written["summary"]).read_text())
    assert summary["scenarios"]["1B"]["verified"] is True
    assert summary["scenarios"]["1B"]["provenance"] == "digitized-approximate"


def test_emitted_csvs_are_deterministic(bau_run, tmp_path):
    p, res = bau_run
    meta = {"name": p.name, "fingerprint": p.fingerprint(),
            "provenance": p.provenance}
    emit_outputs([res], meta, tmp_path / "a", figures=False)
    emit_outputs([res], meta, tmp_path / "b", figures=False)
    for rel in ("BAU/additions.csv", "BAU/cost_breakdown.csv", "BAU/dispatch_y1.csv"):
        fa, fb = tmp_path / "a" / rel, tmp_path / "b" / rel
        assert fa.read_bytes() == fb.read_bytes()


def test_reductions_csv_emitted_with_bau(tmp_path):
    p_bau = tiny("BAU", years=1, hours=4)
    p_3b = tiny("3B", years=1, hours=4)
    r1 = run_scenario(p_bau, SolveOptions(mip_gap=0.001, backend="highs"))
    r2 = run_scenario(p_3b, SolveOptions(mip_gap=0.001, backend="highs"))
    meta = {"name": p_bau.name, "fingerprint": p_bau.fingerprint(),
            "provenance": p_bau.provenance}
    written = emit_outputs([r1, r2], meta, tmp_path / "out", figures=False)
    assert written["reductions"] is not None
    text = Path(written["reductions"]).read_text().splitlines()
    assert text[0] == "scenario,total_cost_pct,om_pct,fuel_pct,ghg_pct"
    assert text[1].startswith("3B,")
