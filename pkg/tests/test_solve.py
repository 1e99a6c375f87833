import dataclasses
import math

import numpy as np
import pytest

from microplan.catalog import builtin_sanikiluaq, reduce_problem
from microplan.model import MilpInstance, build_model
from microplan.solve import (
    SolveError,
    SolveOptions,
    check_feasibility,
    extract_plan,
    solve,
)


def tiny(sid="BAU", years=1, hours=2, segments=1):
    p = reduce_problem(builtin_sanikiluaq(sid), years=years, hours=hours)
    return dataclasses.replace(
        p, assumptions=dataclasses.replace(p.assumptions, fuel_segments=segments))


def knapsackish():
    # min -3x - 2y  s.t. x + y <= 3, x, y integer in [0, 3]
    ins = MilpInstance("toy")
    x = ins.add_col("x", 0, 3, "I", obj=-3.0)
    y = ins.add_col("y", 0, 3, "I", obj=-2.0)
    ins.add_row("cap", "L", 3.0, [(x, 1.0), (y, 1.0)])
    return ins


def test_pure_lp_bound_active():
    ins = MilpInstance("lp")
    x = ins.add_col("x", 0, math.inf, "C", obj=1.0)
    ins.add_row("floor", "G", 3.0, [(x, 1.0)])
    sol = solve(ins, SolveOptions(mip_gap=0.0))
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(3.0, abs=1e-9)
    assert sol.node_count == 1


def test_toy_milp_optimum():
    sol = solve(knapsackish(), SolveOptions(mip_gap=0.0))
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(-9.0, abs=1e-9)  # x=3, y=0
    assert sol.best_bound == pytest.approx(sol.objective, abs=1e-6)


def test_integrality_of_returned_solution():
    sol = solve(knapsackish(), SolveOptions(mip_gap=0.0))
    for v in sol.x:
        assert abs(v - round(v)) <= 1e-6


def test_infeasible_demand_exceeds_capacity():
    p = tiny("BAU", years=1, hours=2)
    prof = dataclasses.replace(
        p.profiles, load=dataclasses.replace(
            p.profiles.load, values=(9000.0, 9000.0)))
    p = dataclasses.replace(p, profiles=prof)
    ins, _ = build_model(p)
    sol = solve(ins, SolveOptions(mip_gap=0.0))
    assert sol.status == "infeasible"
    assert sol.x is None
    with pytest.raises(SolveError, match="no incumbent"):
        extract_plan(sol, None, p)


def test_unbounded_milp():
    ins = MilpInstance("unb")
    x = ins.add_col("x", 0, math.inf, "C", obj=-1.0)
    ins.add_row("r", "G", 0.0, [(x, 1.0)])
    sol = solve(ins, SolveOptions(mip_gap=0.0))
    assert sol.status == "unbounded"


def test_node_limit_reports_limit_hit():
    p = tiny("BAU", years=1, hours=2)
    ins, _ = build_model(p)
    sol = solve(ins, SolveOptions(mip_gap=0.0, node_limit=2))
    assert sol.status in ("limit-hit", "optimal", "gap-limit")
    if sol.status == "limit-hit":
        assert sol.node_count <= 3


def test_lp_relaxation_bounds_milp():
    p = tiny("BAU", years=1, hours=2)
    ins, _ = build_model(p)
    c, lb, ub, vartype, senses, rhs = ins.arrays()
    from microplan.simplex import BoundedSimplex
    relax = BoundedSimplex(ins.matrix(), senses, rhs, c).solve(lb, ub)
    sol = solve(ins, SolveOptions(mip_gap=0.0))
    assert relax.objective <= sol.objective + 1e-6


def test_embedded_matches_highs_on_tiny_instances():
    for sid, years, hours in (("BAU", 1, 2), ("BAU", 2, 2), ("3B", 1, 2)):
        p = tiny(sid, years=years, hours=hours)
        ins, _ = build_model(p)
        a = solve(ins, SolveOptions(mip_gap=0.0))
        b = solve(ins, SolveOptions(mip_gap=0.0, backend="highs"))
        if a.objective is None:
            assert b.objective is None
        else:
            assert a.objective == pytest.approx(b.objective, rel=1e-6)


def test_solver_solution_passes_checker():
    p = tiny("BAU", years=1, hours=2)
    ins, idx = build_model(p)
    sol = solve(ins, SolveOptions(mip_gap=0.0))
    report = check_feasibility(ins, sol.x, 1e-6)
    assert report.ok
    assert report.max_residual <= 1e-6


def test_checker_flags_constructed_violations():
    p = tiny("3B", years=1, hours=2)
    ins, idx = build_model(p)
    sol = solve(ins, SolveOptions(mip_gap=0.0, backend="highs"))
    x = sol.x.copy()
    # force simultaneous charge and discharge states
    x[idx.col("batt_ch_state", "b", 1, 1)] = 1.0
    x[idx.col("batt_dch_state", "b", 1, 1)] = 1.0
    report = check_feasibility(ins, x, 1e-6)
    assert not report.ok
    assert any(label.startswith("Eq25") for label, _ in report.violated_rows)


def test_checker_balance_residual_arithmetic():
    p = tiny("BAU", years=1, hours=2)
    ins, idx = build_model(p)
    sol = solve(ins, SolveOptions(mip_gap=0.0))
    x = sol.x.copy()
    x[idx.col("gen_power", "e7", 1, 1)] += 1.0
    report = check_feasibility(ins, x, 1e-6)
    viol = dict(report.violated_rows)
    assert viol.get("Eq4_y1_h1") == pytest.approx(1.0, abs=1e-6)


def test_checker_dimension_mismatch():
    p = tiny("BAU", years=1, hours=2)
    ins, _ = build_model(p)
    from microplan.model import ModelError
    with pytest.raises(ModelError, match="columns"):
        check_feasibility(ins, np.zeros(3), 1e-6)


def test_extract_plan_structure_and_verification():
    p = tiny("BAU", years=1, hours=2)
    ins, idx = build_model(p)
    sol = solve(ins, SolveOptions(mip_gap=0.0))
    plan = extract_plan(sol, idx, p)
    assert plan.verified
    assert plan.objective == pytest.approx(sol.objective, rel=1e-9)
    assert plan.years == 1 and plan.hours == 2
    # BAU with a short horizon builds nothing
    assert all(not np.any(v) for v in plan.additions.values())
    total = sum(plan.dispatch[uid].sum() for uid in plan.dispatch)
    assert total == pytest.approx(sum(p.profiles.load.values), rel=1e-6)
    # states are exactly binary after extraction
    for arr in plan.on_state.values():
        assert set(np.unique(arr)) <= {0.0, 1.0}


def test_deterministic_solve():
    p = tiny("BAU", years=1, hours=2)
    ins, _ = build_model(p)
    a = solve(ins, SolveOptions(mip_gap=0.0))
    b = solve(ins, SolveOptions(mip_gap=0.0))
    assert a.objective == b.objective
    assert a.node_count == b.node_count
    assert np.array_equal(a.x, b.x)


def test_solve_options_validation():
    with pytest.raises(ValueError):
        SolveOptions(mip_gap=-1)
    with pytest.raises(ValueError):
        SolveOptions(time_limit=0)
    with pytest.raises(ValueError):
        SolveOptions(backend="cplex")
