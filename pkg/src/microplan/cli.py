"""Command-line interface: plan, verify, oracle, and compare subcommands.

Exit codes: 0 success, 2 argument/problem-file errors, 3 infeasible,
4 solver limit hit without a usable incumbent, 5 verification failure,
1 unexpected errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PARSE = 2
EXIT_INFEASIBLE = 3
EXIT_LIMIT = 4
EXIT_VERIFY = 5

_ENV_OUT = "MICROPLAN_OUT"


def _default_out() -> str:
    return os.environ.get(_ENV_OUT, "microplan-out")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="microplan",
        description="Capacity-expansion and dispatch planning for "
                    "remote-community microgrids.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="build and solve planning scenarios")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--builtin", choices=["sanikiluaq"], default=None,
                     help="use a bundled dataset (default when --problem absent)")
    src.add_argument("--problem", help="problem file (YAML)")
    p.add_argument("--scenario", required=True,
                   help="scenario id or comma-separated list (e.g. BAU,1A,4B)")
    p.add_argument("--years", type=int, help="truncate the planning horizon")
    p.add_argument("--hours", type=int, help="reduce the representative hours")
    p.add_argument("--fuel-segments", type=int, help="piecewise fuel segments")
    p.add_argument("--gap", type=float, default=0.01, help="relative MIP gap")
    p.add_argument("--time-limit", type=float, help="seconds per scenario")
    p.add_argument("--node-limit", type=int)
    p.add_argument("--backend", choices=["embedded", "highs"], default="embedded")
    p.add_argument("--export-only", metavar="PATH",
                   help="write the model (.mps or .lp) and skip solving")
    p.add_argument("--out", default=None,
                   help=f"output directory (default ${_ENV_OUT} or ./microplan-out)")
    p.add_argument("--no-plots", action="store_true", help="skip figure rendering")
    p.add_argument("--jobs", type=int, default=0,
                   help="concurrent scenario solves (0 = one per scenario)")

    v = sub.add_parser("verify", help="check a solution file against a model file")
    v.add_argument("--model", required=True, help="MPS model file")
    v.add_argument("--solution", required=True, help="solution file (name value lines)")
    v.add_argument("--tol", type=float, default=1e-6)
    v.add_argument("--names", help="sidecar name map (written on export overflow)")

    o = sub.add_parser("oracle", help="run the enumeration-equivalence suite")
    o.add_argument("--suite", default="default", choices=["default"])
    o.add_argument("--count", type=int, default=20)
    o.add_argument("--seed", type=int, default=None)
    o.add_argument("--dump", help="write suite problems here for replay")

    c = sub.add_parser("compare", help="reduction table from run summaries")
    c.add_argument("summaries", nargs="+", help="summary.json files to merge")
    c.add_argument("--out", help="write reductions.csv here")
    return ap


# ---------------------------------------------------------------------------

def _load_problem(args, scenario_id):
    from . import catalog
    if args.problem:
        problem = catalog.load_problem(args.problem, scenario_id)
    else:
        problem = catalog.builtin_sanikiluaq(scenario_id)
    if args.years or args.hours or args.fuel_segments:
        import dataclasses
        problem = catalog.reduce_problem(problem, years=args.years, hours=args.hours)
        if args.fuel_segments:
            problem = dataclasses.replace(
                problem, assumptions=dataclasses.replace(
                    problem.assumptions, fuel_segments=args.fuel_segments))
    return problem


def _solve_one(payload):
    from .report import run_scenario
    from .solve import SolveOptions
    problem, opts_kw = payload
    return run_scenario(problem, SolveOptions(**opts_kw))


def cmd_plan(args) -> int:
    from . import catalog
    from .model import build_model
    from .mpsio import export_model

    scenarios = [s.strip() for s in args.scenario.split(",") if s.strip()]
    if not scenarios:
        print("plan: no scenario given", file=sys.stderr)
        return EXIT_PARSE
    try:
        problems = [_load_problem(args, sid) for sid in scenarios]
    except (catalog.ProblemFormatError, catalog.InvariantError, OSError) as exc:
        print(f"plan: {exc}", file=sys.stderr)
        return EXIT_PARSE

    if args.export_only:
        if len(problems) != 1:
            print("plan: --export-only takes exactly one scenario", file=sys.stderr)
            return EXIT_PARSE
        fmt = Path(args.export_only).suffix.lstrip(".").lower() or "mps"
        instance, _ = build_model(problems[0])
        path = export_model(instance, fmt, args.export_only)
        print(f"wrote {path}")
        return EXIT_OK

    opts_kw = dict(mip_gap=args.gap, backend=args.backend)
    if args.time_limit:
        opts_kw["time_limit"] = args.time_limit
    if args.node_limit:
        opts_kw["node_limit"] = args.node_limit
    payloads = [(p, opts_kw) for p in problems]
    jobs = args.jobs or min(len(payloads), os.cpu_count() or 1)
    if jobs > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(payloads))) as pool:
            results = list(pool.map(_solve_one, payloads))
    else:
        results = [_solve_one(pl) for pl in payloads]

    from .report import emit_outputs
    outdir = args.out or _default_out()
    problem_meta = {
        "name": problems[0].name,
        "fingerprint": problems[0].fingerprint(),
        "provenance": problems[0].provenance,
        "years": problems[0].assumptions.horizon_years,
        "rep_hours": problems[0].assumptions.rep_hours,
    }
    written = emit_outputs(results, problem_meta, outdir,
                           options_meta={**opts_kw, "scenarios": scenarios},
                           figures=not args.no_plots)
    for res in sorted(results, key=lambda r: r.scenario_id):
        line = f"{res.scenario_id}: {res.status}"
        if res.objective is not None:
            line += f", NPC {res.objective:,.0f} $"
        if res.report is not None:
            line += (f", fuel {res.report.cost.litres_total:,.0f} l, "
                     f"{res.report.cost.emissions_kg:,.0f} kg CO2e")
        if res.error:
            line += f" ({res.error})"
        print(line)
    print(f"outputs in {written['summary']}")

    if any(r.status == "infeasible" for r in results):
        return EXIT_INFEASIBLE
    if any(r.status == "limit-hit" and r.plan is None for r in results):
        return EXIT_LIMIT
    if any(r.status == "error" for r in results):
        return EXIT_ERROR
    return EXIT_OK


def cmd_verify(args) -> int:
    from .mpsio import MpsFormatError, read_mps, read_solution, solution_vector
    from .solve import check_feasibility
    try:
        instance = read_mps(args.model)
        names_map = None
        sidecar = args.names or (args.model + ".names.json")
        if os.path.exists(sidecar):
            with open(sidecar) as f:
                names_map = json.load(f).get("cols", {})
        values, objective = read_solution(args.solution, names_map)
        x = solution_vector(instance, values)
    except (MpsFormatError, OSError) as exc:
        print(f"verify: {exc}", file=sys.stderr)
        return EXIT_PARSE
    report = check_feasibility(instance, x, args.tol)
    print(report.summary())
    if objective is not None:
        import numpy as np
        model_obj = float(np.asarray(instance.obj) @ x) + instance.obj_offset
        print(f"objective: file {objective:,.6g}, recomputed {model_obj:,.6g}")
    return EXIT_OK if report.ok else EXIT_VERIFY


def cmd_oracle(args) -> int:
    import numpy as np
    from .model import build_model
    from .oracle import SUITE_SEED, OracleError, enumerate_optimum, tiny_suite
    from .solve import SolveOptions, check_feasibility, solve
    from .catalog import save_problem

    seed = args.seed if args.seed is not None else SUITE_SEED
    suite = tiny_suite(count=args.count, seed=seed)
    if args.dump:
        Path(args.dump).mkdir(parents=True, exist_ok=True)
        for i, p in enumerate(suite):
            save_problem(p, Path(args.dump) / f"tiny_{i:02d}.yaml")
    failures = 0
    for i, p in enumerate(suite):
        instance, index = build_model(p)
        try:
            enum_obj = enumerate_optimum(p).objective
        except OracleError:
            enum_obj = None
        sol = solve(instance, SolveOptions(mip_gap=0.0))
        if enum_obj is None or sol.objective is None:
            ok = enum_obj is None and sol.objective is None
        else:
            ok = abs(enum_obj - sol.objective) <= 1e-6 * max(1.0, abs(enum_obj))
            if ok:
                ok = check_feasibility(instance, sol.x, 1e-6).ok
        failures += not ok
        state = "ok" if ok else "MISMATCH"
        enum_s = "infeasible" if enum_obj is None else f"{enum_obj:.4f}"
        bb_s = "infeasible" if sol.objective is None else f"{sol.objective:.4f}"
        print(f"[{i:02d}] enum={enum_s} solver={bb_s} {state}")
    print(f"{len(suite) - failures}/{len(suite)} equivalent")
    return EXIT_OK if failures == 0 else EXIT_VERIFY


def cmd_compare(args) -> int:
    from .report import CostReport, ScenarioReport, compare
    reports = {}
    for path in args.summaries:
        try:
            with open(path) as f:
                doc = json.load(f)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"compare: {path}: {exc}", file=sys.stderr)
            return EXIT_PARSE
        for sid, entry in doc.get("scenarios", {}).items():
            if "cost" not in entry:
                continue
            cost = CostReport(capital_npc=entry["cost"]["capital_npc"],
                              fuel_npc=entry["cost"]["fuel_npc"],
                              om_npc=entry["cost"]["om_npc"],
                              total_npc=entry["cost"]["total_npc"],
                              litres_total=entry["cost"]["litres_total"],
                              emissions_kg=entry["cost"]["emissions_kg"],
                              per_tech={}, per_year={})
            reports[sid] = ScenarioReport(
                scenario_id=sid, cost=cost, additions=entry.get("additions", {}),
                fingerprint=entry.get("fingerprint", ""),
                provenance=entry.get("provenance", ""))
    if "BAU" not in reports:
        print("compare: no solved BAU scenario among the summaries", file=sys.stderr)
        return EXIT_PARSE
    bau = reports.pop("BAU")
    try:
        rows = compare(list(reports.values()), bau)
    except Exception as exc:
        print(f"compare: {exc}", file=sys.stderr)
        return EXIT_PARSE
    header = f"{'scenario':>9} {'total%':>8} {'O&M%':>8} {'fuel%':>8} {'GHG%':>8}"
    print(header)
    for r in rows:
        print(f"{r['scenario']:>9} {r['total_cost_pct']:8.2f} {r['om_pct']:8.2f} "
              f"{r['fuel_pct']:8.2f} {r['ghg_pct']:8.2f}")
    if args.out:
        import csv
        with open(args.out, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["scenario", "total_cost_pct", "om_pct", "fuel_pct", "ghg_pct"])
            for r in rows:
                w.writerow([r["scenario"], f"{r['total_cost_pct']:.2f}",
                            f"{r['om_pct']:.2f}", f"{r['fuel_pct']:.2f}",
                            f"{r['ghg_pct']:.2f}"])
        print(f"wrote {args.out}")
    return EXIT_OK


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code not in (0, None) else EXIT_OK
    handlers = {"plan": cmd_plan, "verify": cmd_verify,
                "oracle": cmd_oracle, "compare": cmd_compare}
    try:
        return handlers[args.command](args)
    except KeyboardInterrupt:
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
