import json

from microplan.cli import main


def run(*argv):
    return main(list(argv))


def test_plan_smoke_run(tmp_path):
    out = tmp_path / "run"
    code = run("plan", "--builtin", "sanikiluaq", "--scenario", "BAU",
               "--years", "1", "--hours", "2", "--gap", "0",
               "--out", str(out), "--no-plots")
    assert code == 0
    assert (out / "summary.json").exists()
    assert (out / "BAU" / "dispatch_y1.csv").exists()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["scenarios"]["BAU"]["status"] == "optimal"
    assert summary["scenarios"]["BAU"]["verified"] is True


def test_plan_multi_scenario_concurrent(tmp_path):
    out = tmp_path / "run"
    code = run("plan", "--scenario", "BAU,3B", "--years", "1", "--hours", "4",
               "--backend", "highs", "--gap", "0.002", "--out", str(out),
               "--jobs", "2", "--no-plots")
    assert code == 0
    assert (out / "reductions.csv").exists()
    assert (out / "BAU").is_dir() and (out / "3B").is_dir()


def test_plan_export_only(tmp_path):
    target = tmp_path / "model.mps"
    code = run("plan", "--scenario", "1A", "--years", "1", "--hours", "24",
               "--export-only", str(target))
    assert code == 0
    text = target.read_text()
    assert text.startswith("NAME")
    assert "Eq4_y1_h1" in text
    # no solve artifacts were produced
    assert not (tmp_path / "microplan-out").exists()


def test_plan_infeasible_exit_code(tmp_path):
    # truncating 1A to two January night hours contradicts the solar share
    code = run("plan", "--scenario", "1A", "--years", "1", "--hours", "2",
               "--backend", "highs", "--out", str(tmp_path / "x"), "--no-plots")
    assert code == 3


def test_plan_unknown_scenario(tmp_path):
    code = run("plan", "--scenario", "9Z", "--out", str(tmp_path / "x"))
    assert code == 2


def test_verify_round_trip(tmp_path):
    from microplan.catalog import builtin_sanikiluaq, reduce_problem
    from microplan.model import build_model
    from microplan.mpsio import write_mps, write_solution
    from microplan.solve import SolveOptions, solve

    p = reduce_problem(builtin_sanikiluaq("BAU"), years=1, hours=2)
    ins, _ = build_model(p)
    sol = solve(ins, SolveOptions(mip_gap=0.0))
    model = tmp_path / "m.mps"
    good = tmp_path / "good.sol"
    write_mps(ins, model)
    write_solution(good, ins, sol.x, sol.objective)
    assert run("verify", "--model", str(model), "--solution", str(good)) == 0

    # corrupt one generator value: balance breaks
    lines = good.read_text().splitlines()
    bad = tmp_path / "bad.sol"
    bumped = []
    for line in lines:
        if line.startswith("P_e7_y1_h1 "):
            name, val = line.split()
            line = f"{name} {float(val) + 25.0}"
        bumped.append(line)
    bad.write_text("\n".join(bumped) + "\n")
    assert run("verify", "--model", str(model), "--solution", str(bad)) == 5


def test_verify_bad_files(tmp_path):
    missing = tmp_path / "nope.mps"
    assert run("verify", "--model", str(missing), "--solution", str(missing)) == 2


def test_oracle_subcommand(tmp_path):
    dump = tmp_path / "suite"
    code = run("oracle", "--count", "3", "--dump", str(dump))
    assert code == 0
    assert len(list(dump.glob("tiny_*.yaml"))) == 3


def test_compare_subcommand(tmp_path):
    out1 = tmp_path / "r1"
    assert run("plan", "--scenario", "BAU,3B", "--years", "1", "--hours", "4",
               "--backend", "highs", "--gap", "0.002", "--out", str(out1),
               "--jobs", "1", "--no-plots") == 0
    table = tmp_path / "red.csv"
    code = run("compare", str(out1 / "summary.json"), "--out", str(table))
    assert code == 0
    lines = table.read_text().splitlines()
    assert lines[0].startswith("scenario,")
    assert any(line.startswith("3B,") for line in lines)


def test_compare_requires_bau(tmp_path):
    s = tmp_path / "s.json"
    s.write_text(json.dumps({"scenarios": {"1A": {"cost": {
        "capital_npc": 1, "fuel_npc": 1, "om_npc": 1, "total_npc": 3,
        "litres_total": 1, "emissions_kg": 2.68}, "fingerprint": "x"}}}))
    assert run("compare", str(s)) == 2


def test_default_out_env(tmp_path, monkeypatch):
    monkeypatch.setenv("MICROPLAN_OUT", str(tmp_path / "envout"))
    code = run("plan", "--scenario", "BAU", "--years", "1", "--hours", "2",
               "--gap", "0", "--no-plots")
    assert code == 0
    assert (tmp_path / "envout" / "summary.json").exists()
