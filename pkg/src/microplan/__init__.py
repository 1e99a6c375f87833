"""Capacity-expansion and dispatch planning for remote-community microgrids.

The package builds a multi-year mixed-integer linear program over a
288-hour representative year (one averaged 24-hour day per month) covering
diesel, solar, wind, battery, and hydrogen technologies, solves it with an
embedded branch-and-bound / simplex pair or exports it to standard solver
formats, and reports net present costs, fuel use, and emission reductions
per planning scenario.
"""

__version__ = "0.1.0"

from .catalog import (
    PlanningProblem,
    builtin_sanikiluaq,
    load_problem,
    reduce_problem,
    save_problem,
    validate_problem,
)
from .model import (
    MilpInstance,
    PlanSolution,
    VariableIndex,
    apply_scenario,
    build_model,
    equation_coverage,
    npc_capital,
    recompute_objective,
)
from .solve import (
    MilpSolution,
    SolveOptions,
    check_feasibility,
    extract_plan,
    solve,
)
from .mpsio import export_model, read_mps, read_solution, write_solution
from .oracle import enumerate_optimum, simulate_dispatch, tiny_suite
from .report import compare, cost_breakdown, emit_outputs, run_scenario

__all__ = [
    "PlanningProblem",
    "builtin_sanikiluaq",
    "load_problem",
    "reduce_problem",
    "save_problem",
    "validate_problem",
    "MilpInstance",
    "PlanSolution",
    "VariableIndex",
    "apply_scenario",
    "build_model",
    "equation_coverage",
    "npc_capital",
    "recompute_objective",
    "MilpSolution",
    "SolveOptions",
    "check_feasibility",
    "extract_plan",
    "solve",
    "export_model",
    "read_mps",
    "read_solution",
    "write_solution",
    "enumerate_optimum",
    "simulate_dispatch",
    "tiny_suite",
    "compare",
    "cost_breakdown",
    "emit_outputs",
    "run_scenario",
]
