"""MILP solving: embedded branch-and-bound plus an optional HiGHS backend.

The embedded path (default) runs best-bound branch-and-bound over the
bounded-variable simplex and is intended for desk-scale instances; full
Sanikiluaq-sized models should go through export_model to an external
solver or use backend="highs" (scipy's HiGHS bridge), whose solutions are
verified by the same independent feasibility checker.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .catalog import PlanningProblem
from .model import (
    CONTINUOUS,
    MilpInstance,
    ModelError,
    PlanSolution,
    VariableIndex,
)
from .simplex import BoundedSimplex, SimplexError


class SolveError(RuntimeError):
    """Solve could not produce a usable result (no incumbent, numerical failure)."""


@dataclass
class SolveOptions:
    mip_gap: float = 1e-6
    time_limit: Optional[float] = None     # seconds
    node_limit: Optional[int] = None
    branching: str = "most-fractional"
    pivot_tol: float = 1e-9
    int_tol: float = 1e-6
    backend: str = "embedded"              # embedded | highs
    depth_first_after: int = 20000         # open-node count triggering LIFO fallback

    def __post_init__(self):
        if self.mip_gap < 0:
            raise ValueError("mip_gap must be >= 0")
        if self.time_limit is not None and self.time_limit <= 0:
            raise ValueError("time_limit must be positive")
        if self.node_limit is not None and self.node_limit <= 0:
            raise ValueError("node_limit must be positive")
        if self.backend not in ("embedded", "highs"):
            raise ValueError(f"unknown backend {self.backend!r}")


@dataclass
class MilpSolution:
    status: str                      # optimal | gap-limit | infeasible | unbounded | limit-hit
    x: Optional[np.ndarray]
    objective: Optional[float]
    best_bound: float
    node_count: int
    gap: Optional[float]
    backend: str
    instance: MilpInstance


def _relative_gap(objective: float, bound: float) -> float:
    return (objective - bound) / max(1.0, abs(objective))


def solve(instance: MilpInstance, opts: Optional[SolveOptions] = None) -> MilpSolution:
    """Minimize the instance; deterministic for identical inputs and options."""
    opts = opts or SolveOptions()
    if opts.backend == "highs":
        return _solve_highs(instance, opts)
    return _solve_embedded(instance, opts)


# ---------------------------------------------------------------------------
# Embedded branch-and-bound

def _solve_embedded(instance: MilpInstance, opts: SolveOptions) -> MilpSolution:
    c, lb, ub, vartype, senses, rhs = instance.arrays()
    int_cols = np.flatnonzero(vartype != CONTINUOUS)
    for j in int_cols:
        if not (math.isfinite(lb[j]) and math.isfinite(ub[j])):
            raise ModelError(f"integer column {instance.col_names[j]} is unbounded")
    engine = BoundedSimplex(instance.matrix(), senses, rhs, c)
    offset = instance.obj_offset
    t0 = time.monotonic()

    def lp(node_lb, node_ub):
        try:
            return engine.solve(node_lb, node_ub, pivot_tol=opts.pivot_tol)
        except SimplexError as exc:
            raise SolveError(f"LP failure in {instance.name}: {exc}") from exc

    root = lp(lb, ub)
    nodes = 1
    if root.status == "infeasible":
        return MilpSolution("infeasible", None, None, math.inf, nodes, None,
                            "embedded", instance)
    if root.status == "unbounded":
        return MilpSolution("unbounded", None, None, -math.inf, nodes, None,
                            "embedded", instance)

    incumbent_x = None
    incumbent_obj = math.inf
    # open node: (bound, seq, depth, lb, ub, x_hint)
    seq = 0
    open_nodes = [(root.objective, seq, 0, lb, ub, root.x)]
    limit_hit = False

    def fractional(x):
        if int_cols.size == 0:
            return None
        vals = x[int_cols]
        frac = np.abs(vals - np.round(vals))
        worst = np.flatnonzero(frac > opts.int_tol)
        if worst.size == 0:
            return None
        scores = np.minimum(frac[worst], 1 - frac[worst])
        best = worst[int(np.argmax(scores))]
        return int(int_cols[best])

    while open_nodes:
        best_bound = min(min(n[0] for n in open_nodes), incumbent_obj)
        if incumbent_x is not None and _relative_gap(incumbent_obj, best_bound) <= opts.mip_gap:
            break
        if opts.time_limit is not None and time.monotonic() - t0 > opts.time_limit:
            limit_hit = True
            break
        if opts.node_limit is not None and nodes >= opts.node_limit:
            limit_hit = True
            break

        if len(open_nodes) > opts.depth_first_after:
            pick = len(open_nodes) - 1       # LIFO under memory pressure
        else:
            pick = min(range(len(open_nodes)), key=lambda i: (open_nodes[i][0],
                                                              open_nodes[i][1]))
        bound, _, depth, nlb, nub, x = open_nodes.pop(pick)
        if bound >= incumbent_obj - 1e-12 * max(1.0, abs(incumbent_obj)):
            continue

        branch_col = fractional(x)
        if branch_col is None:
            if bound < incumbent_obj:
                incumbent_obj = bound
                incumbent_x = x.copy()
            continue

        v = x[branch_col]
        for side in ("down", "up"):
            child_lb, child_ub = nlb, nub
            if side == "down":
                child_ub = nub.copy()
                child_ub[branch_col] = math.floor(v + opts.int_tol)
            else:
                child_lb = nlb.copy()
                child_lb[branch_col] = math.ceil(v - opts.int_tol)
            if child_lb[branch_col] > child_ub[branch_col]:
                continue
            res = lp(child_lb, child_ub)
            nodes += 1
            if res.status == "infeasible":
                continue
            if res.status == "unbounded":
                return MilpSolution("unbounded", None, None, -math.inf, nodes,
                                    None, "embedded", instance)
            if res.objective >= incumbent_obj - 1e-12 * max(1.0, abs(incumbent_obj)):
                continue
            seq += 1
            open_nodes.append((res.objective, seq, depth + 1, child_lb, child_ub, res.x))

    if open_nodes:
        best_bound = min(min(n[0] for n in open_nodes), incumbent_obj)
    else:
        best_bound = incumbent_obj
    if incumbent_x is None:
        if limit_hit:
            return MilpSolution("limit-hit", None, None, best_bound + offset, nodes,
                                None, "embedded", instance)
        return MilpSolution("infeasible", None, None, math.inf, nodes, None,
                            "embedded", instance)
    gap = _relative_gap(incumbent_obj, best_bound)
    if limit_hit:
        status = "limit-hit"
    elif open_nodes and gap > 1e-9:
        status = "gap-limit"
    else:
        status = "optimal"
    return MilpSolution(status, incumbent_x, incumbent_obj + offset,
                        best_bound + offset, nodes, gap, "embedded", instance)


# ---------------------------------------------------------------------------
# HiGHS backend (scipy bridge)

def _solve_highs(instance: MilpInstance, opts: SolveOptions) -> MilpSolution:
    from scipy.optimize import Bounds, LinearConstraint, milp

    c, lb, ub, vartype, senses, rhs = instance.arrays()
    A = instance.matrix()
    row_lb = np.where(senses == "G", rhs, np.where(senses == "E", rhs, -np.inf))
    row_ub = np.where(senses == "L", rhs, np.where(senses == "E", rhs, np.inf))
    integrality = (vartype != CONTINUOUS).astype(np.uint8)
    options = {"mip_rel_gap": opts.mip_gap, "presolve": True}
    if opts.time_limit is not None:
        options["time_limit"] = opts.time_limit
    if opts.node_limit is not None:
        options["node_limit"] = opts.node_limit
    res = milp(c=c, constraints=[LinearConstraint(A, row_lb, row_ub)],
               integrality=integrality, bounds=Bounds(lb, ub), options=options)

    offset = instance.obj_offset
    nodes = int(getattr(res, "mip_node_count", 0) or 0)
    if res.status == 2:
        return MilpSolution("infeasible", None, None, math.inf, nodes, None,
                            "highs", instance)
    if res.status == 3:
        return MilpSolution("unbounded", None, None, -math.inf, nodes, None,
                            "highs", instance)
    if res.x is None:
        return MilpSolution("limit-hit", None, None,
                            float(getattr(res, "mip_dual_bound", -math.inf) or -math.inf)
                            + offset, nodes, None, "highs", instance)
    objective = float(res.fun) + offset
    bound = float(getattr(res, "mip_dual_bound", res.fun) or res.fun) + offset
    gap = _relative_gap(objective, bound)
    if res.status == 1:
        status = "limit-hit"
    elif gap > 1e-9:
        status = "gap-limit"
    else:
        status = "optimal"
    return MilpSolution(status, np.asarray(res.x, dtype=float), objective, bound,
                        nodes, gap, "highs", instance)


# ---------------------------------------------------------------------------
# Independent feasibility checking

@dataclass
class FeasibilityReport:
    ok: bool
    tol: float
    max_residual: float
    residuals: np.ndarray                    # per row, absolute
    violated_rows: list                      # (label, residual), sorted desc
    bound_violations: list                   # (column name, amount)
    integrality_violations: list             # (column name, fractional part)

    def summary(self) -> str:
        if self.ok:
            return f"feasible at tol {self.tol:g} (max residual {self.max_residual:.3e})"
        lines = [f"INFEASIBLE at tol {self.tol:g}: "
                 f"{len(self.violated_rows)} row(s), "
                 f"{len(self.bound_violations)} bound(s), "
                 f"{len(self.integrality_violations)} integrality"]
        for label, r in self.violated_rows[:20]:
            lines.append(f"  row {label}: residual {r:.6g}")
        for name, a in self.bound_violations[:20]:
            lines.append(f"  bound {name}: out by {a:.6g}")
        for name, a in self.integrality_violations[:20]:
            lines.append(f"  integer {name}: fraction {a:.6g}")
        return "\n".join(lines)


def check_feasibility(instance: MilpInstance, x, tol: float = 1e-6) -> FeasibilityReport:
    """Per-row residuals and bound/integrality violations of a value vector."""
    x = np.asarray(x, dtype=float)
    if x.shape != (instance.n_cols,):
        raise ModelError(f"value vector has shape {x.shape}, "
                         f"instance has {instance.n_cols} columns")
    A = instance.matrix()
    act = A @ x
    rhs = np.asarray(instance.row_rhs)
    senses = np.asarray(instance.row_sense)
    resid = np.where(senses == "L", np.clip(act - rhs, 0, None),
                     np.where(senses == "G", np.clip(rhs - act, 0, None),
                              np.abs(act - rhs)))
    violated = [(instance.row_labels[i], float(resid[i]))
                for i in np.flatnonzero(resid > tol)]
    violated.sort(key=lambda t: -t[1])

    lb = np.asarray(instance.col_lb)
    ub = np.asarray(instance.col_ub)
    out = np.maximum(lb - x, x - ub)
    bound_viol = [(instance.col_names[j], float(out[j]))
                  for j in np.flatnonzero(out > tol)]
    int_viol = []
    for j in range(instance.n_cols):
        if instance.vartype[j] != CONTINUOUS:
            frac = abs(x[j] - round(x[j]))
            if frac > tol:
                int_viol.append((instance.col_names[j], float(frac)))
    ok = not (violated or bound_viol or int_viol)
    return FeasibilityReport(ok, tol, float(np.max(resid, initial=0.0)),
                             resid, violated, bound_viol, int_viol)


# ---------------------------------------------------------------------------
# Plan extraction and reconstruction

def extract_plan(solution: MilpSolution, index: VariableIndex,
                 problem: PlanningProblem, tol: float = 1e-6) -> PlanSolution:
    """Round integers, re-optimize the continuous part, verify, and structure.

    Re-solving with integers fixed keeps the continuous dispatch exactly
    consistent with the rounded commitment pattern, so the verification
    below runs at full tolerance.
    """
    if solution.x is None:
        raise SolveError(f"no incumbent to extract (status {solution.status})")
    instance = solution.instance
    c, lb, ub, vartype, senses, rhs = instance.arrays()
    x = np.asarray(solution.x, dtype=float).copy()
    for j in np.flatnonzero(vartype != CONTINUOUS):
        r = round(x[j])
        if abs(x[j] - r) > 1e-4:
            raise SolveError(f"column {instance.col_names[j]} too fractional "
                             f"to round: {x[j]}")
        x[j] = r
        lb[j] = ub[j] = r

    if solution.backend == "highs":
        from scipy.optimize import linprog
        A = instance.matrix()
        row_lb = np.where(senses == "G", rhs, np.where(senses == "E", rhs, -np.inf))
        row_ub = np.where(senses == "L", rhs, np.where(senses == "E", rhs, np.inf))
        import scipy.sparse as sp
        ineq = sp.vstack([A, -A]).tocsc()
        b_ineq = np.concatenate([row_ub, -row_lb])
        keep = np.isfinite(b_ineq)
        res = linprog(c, A_ub=ineq[keep], b_ub=b_ineq[keep],
                      bounds=np.column_stack([lb, ub]), method="highs")
        if res.status != 0:
            raise SolveError("post-rounding continuous re-solve infeasible")
        x = np.asarray(res.x, dtype=float)
    else:
        engine = BoundedSimplex(instance.matrix(), senses, rhs, c)
        res = engine.solve(lb, ub)
        if res.status != "optimal":
            raise SolveError(f"post-rounding continuous re-solve: {res.status}")
        x = res.x

    for j in np.flatnonzero(vartype != CONTINUOUS):
        x[j] = round(x[j])
    report = check_feasibility(instance, x, tol)
    if not report.ok:
        raise SolveError("post-rounding verification failed:\n" + report.summary())
    plan = plan_from_values(x, index, instance, problem)
    plan.objective = float(c @ x) + instance.obj_offset
    plan.verified = True
    return plan


def plan_from_values(x, index: VariableIndex, instance: MilpInstance,
                     problem: PlanningProblem) -> PlanSolution:
    """Structure a raw column-value vector into a PlanSolution."""
    x = np.asarray(x, dtype=float)
    meta = instance.meta
    Y, H = meta["years"], meta["hours"]
    diesel = meta["existing_units"] + meta["new_units"]

    def yearly(family, unit):
        return np.array([x[index.col(family, unit, y)] for y in range(1, Y + 1)])

    def hourly(family, unit):
        return np.array([[x[index.col(family, unit, y, h)] for h in range(1, H + 1)]
                         for y in range(1, Y + 1)])

    additions, additions_capacity, installed = {}, {}, {}
    for unit in meta["expander_units"]:
        if index.has("add_count", unit, 1):
            additions[unit] = np.round(yearly("add_count", unit))
        else:
            additions[unit] = yearly("add_capacity", unit)  # solar, kW
        additions_capacity[unit] = yearly("add_capacity", unit)
        installed[unit] = yearly("installed", unit)

    dispatch, on_state, fuel = {}, {}, {}
    for unit in diesel:
        dispatch[unit] = hourly("gen_power", unit)
        on_state[unit] = np.round(hourly("on_state", unit))
        fuel[unit] = hourly("fuel", unit)
    for unit in ("s", "w"):
        if index.has("gen_power", unit, 1, 1):
            dispatch[unit] = hourly("gen_power", unit)

    plan = PlanSolution(
        objective=0.0, years=Y, hours=H,
        additions=additions, additions_capacity=additions_capacity,
        installed=installed, dispatch=dispatch, on_state=on_state, fuel_lph=fuel,
        fingerprint=problem.fingerprint(), provenance=problem.provenance)
    if index.has("fc_power", "f", 1, 1):
        plan.dispatch["f"] = hourly("fc_power", "f")
        plan.el_consumption = hourly("el_power", "el")
        plan.tank_soc = hourly("tank_soc", "q")
    if index.has("batt_ch", "b", 1, 1):
        plan.batt_charge = hourly("batt_ch", "b")
        plan.batt_discharge = hourly("batt_dch", "b")
        plan.batt_soc = hourly("batt_soc", "b")
        plan.batt_ch_state = np.round(hourly("batt_ch_state", "b"))
        plan.batt_dch_state = np.round(hourly("batt_dch_state", "b"))
    return plan


def values_from_plan(plan: PlanSolution, index: VariableIndex,
                     instance: MilpInstance) -> np.ndarray:
    """Inverse of plan_from_values; fuel auxiliaries are filled consistently."""
    x = np.zeros(instance.n_cols)
    meta = instance.meta
    Y, H = meta["years"], meta["hours"]
    curves = meta["curves"]

    zeros = np.zeros(Y)
    for unit in meta["expander_units"]:
        adds = plan.additions.get(unit, zeros)
        caps = plan.additions_capacity.get(unit, zeros)
        inst = plan.installed.get(unit, zeros)
        for y in range(1, Y + 1):
            if index.has("add_count", unit, y):
                x[index.col("add_count", unit, y)] = adds[y - 1]
            x[index.col("add_capacity", unit, y)] = caps[y - 1]
            x[index.col("installed", unit, y)] = inst[y - 1]

    for unit in meta["existing_units"] + meta["new_units"]:
        curve = curves[unit]
        for y in range(1, Y + 1):
            for h in range(1, H + 1):
                p = float(plan.dispatch[unit][y - 1, h - 1])
                on = float(plan.on_state[unit][y - 1, h - 1])
                x[index.col("gen_power", unit, y, h)] = p
                x[index.col("on_state", unit, y, h)] = on
                if on < 0.5:
                    x[index.col("fuel", unit, y, h)] = 0.0
                    continue
                if p > curve.breakpoints[-1] + 1e-9:
                    k, rate = curve.segments - 1, (curve.slopes[-1] * p
                                                   + curve.intercepts[-1])
                elif p < curve.breakpoints[0] - 1e-9:
                    k, rate = 0, curve.slopes[0] * p + curve.intercepts[0]
                else:
                    k = curve.segment_of(p)
                    rate = curve.slopes[k] * p + curve.intercepts[k]
                if curve.convex and curve.segments > 1:
                    rate = max(curve.slopes[j] * p + curve.intercepts[j]
                               for j in range(curve.segments))
                x[index.col("fuel", unit, y, h)] = rate
                if not curve.convex and curve.segments > 1:
                    x[index.col("fuel_seg", f"{unit}#k{k}", y, h)] = 1.0
                    x[index.col("fuel_seg_power", f"{unit}#k{k}", y, h)] = p

    for unit in ("s", "w"):
        if unit in plan.dispatch:
            for y in range(1, Y + 1):
                for h in range(1, H + 1):
                    x[index.col("gen_power", unit, y, h)] = plan.dispatch[unit][y - 1, h - 1]
    if plan.batt_charge is not None:
        for y in range(1, Y + 1):
            for h in range(1, H + 1):
                x[index.col("batt_ch", "b", y, h)] = plan.batt_charge[y - 1, h - 1]
                x[index.col("batt_dch", "b", y, h)] = plan.batt_discharge[y - 1, h - 1]
                x[index.col("batt_soc", "b", y, h)] = plan.batt_soc[y - 1, h - 1]
                x[index.col("batt_ch_state", "b", y, h)] = plan.batt_ch_state[y - 1, h - 1]
                x[index.col("batt_dch_state", "b", y, h)] = plan.batt_dch_state[y - 1, h - 1]
    if plan.tank_soc is not None:
        for y in range(1, Y + 1):
            for h in range(1, H + 1):
                x[index.col("fc_power", "f", y, h)] = plan.dispatch["f"][y - 1, h - 1]
                x[index.col("el_power", "el", y, h)] = plan.el_consumption[y - 1, h - 1]
                x[index.col("tank_soc", "q", y, h)] = plan.tank_soc[y - 1, h - 1]
    return x
