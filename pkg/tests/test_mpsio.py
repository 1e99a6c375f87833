import dataclasses
import hashlib

import numpy as np
import pytest

from microplan.catalog import builtin_sanikiluaq, reduce_problem
from microplan.model import MilpInstance, build_model
from microplan.mpsio import (
    MpsFormatError,
    export_model,
    read_mps,
    read_solution,
    solution_vector,
    write_lp,
    write_mps,
    write_solution,
)
from microplan.solve import SolveOptions, solve


@pytest.fixture(scope="module")
def built():
    # 1B keeps wind, battery, and hydrogen in the model without the solar
    # share row, which cannot hold on a night-hours truncation
    p = reduce_problem(builtin_sanikiluaq("1B"), years=1, hours=2)
    p = dataclasses.replace(
        p, assumptions=dataclasses.replace(p.assumptions, fuel_segments=2))
    ins, idx = build_model(p)
    return p, ins, idx


def _digest(path):
    with open(path, "rb") as f:
        return hashlib.sha256(f.read()).hexdigest()


def test_mps_round_trip_identity(built, tmp_path):
    _, ins, _ = built
    path = tmp_path / "m.mps"
    write_mps(ins, path)
    again = read_mps(path)
    assert list(again.triplets()) == list(ins.triplets())
    assert again.row_sense == ins.row_sense
    assert again.row_rhs == ins.row_rhs
    assert again.row_labels == ins.row_labels
    assert again.col_names == ins.col_names
    assert again.col_lb == ins.col_lb
    assert again.col_ub == ins.col_ub
    assert again.vartype == ins.vartype
    assert again.obj == ins.obj
    assert again.obj_offset == ins.obj_offset


def test_mps_byte_stability(built, tmp_path):
    _, ins, _ = built
    a, b = tmp_path / "a.mps", tmp_path / "b.mps"
    write_mps(ins, a)
    write_mps(ins, b)
    assert _digest(a) == _digest(b)


def test_lp_byte_stability(built, tmp_path):
    _, ins, _ = built
    a, b = tmp_path / "a.lp", tmp_path / "b.lp"
    write_lp(ins, a)
    write_lp(ins, b)
    assert _digest(a) == _digest(b)


def test_row_names_embed_coordinates(built, tmp_path):
    _, ins, _ = built
    path = tmp_path / "m.mps"
    write_mps(ins, path)
    text = path.read_text()
    assert "Eq4_y1_h1" in text
    assert "Eq5_y1_h2" in text
    assert "P_e1_y1_h1" in text


def test_round_trip_preserves_optimum(built, tmp_path):
    _, ins, _ = built
    path = tmp_path / "m.mps"
    write_mps(ins, path)
    again = read_mps(path)
    a = solve(ins, SolveOptions(mip_gap=0.0, backend="highs"))
    b = solve(again, SolveOptions(mip_gap=0.0, backend="highs"))
    assert a.objective == pytest.approx(b.objective, rel=0, abs=0)


def test_objective_offset_round_trip(tmp_path):
    ins = MilpInstance("off")
    x = ins.add_col("x", 0, 5, "C", obj=1.0)
    ins.add_row("r", "G", 2.0, [(x, 1.0)])
    ins.obj_offset = 42.5
    path = tmp_path / "m.mps"
    write_mps(ins, path)
    again = read_mps(path)
    assert again.obj_offset == 42.5
    sol = solve(again, SolveOptions(mip_gap=0.0))
    assert sol.objective == pytest.approx(44.5, abs=1e-9)


def test_name_overflow_sidecar(tmp_path):
    ins = MilpInstance("long")
    x = ins.add_col("x" * 40, 0, 1, "C", obj=1.0)
    ins.add_row("r" * 40, "G", 0.5, [(x, 1.0)])
    path = tmp_path / "m.mps"
    write_mps(ins, path, max_name_len=16)
    sidecar = tmp_path / "m.mps.names.json"
    assert sidecar.exists()
    import json
    names = json.loads(sidecar.read_text())
    assert "x" * 40 in names["cols"].values()
    assert "r" * 40 in names["rows"].values()
    again = read_mps(path)
    assert again.col_names == ["C0000000"]
    # solution files written against short names resolve through the map
    spath = tmp_path / "m.sol"
    spath.write_text("C0000000 0.5\n")
    values, _ = read_solution(spath, names_map=names["cols"])
    assert values == {"x" * 40: 0.5}


def test_solution_file_round_trip(built, tmp_path):
    _, ins, _ = built
    sol = solve(ins, SolveOptions(mip_gap=0.0, backend="highs"))
    path = tmp_path / "m.sol"
    write_solution(path, ins, sol.x, sol.objective)
    values, objective = read_solution(path)
    assert objective == sol.objective
    x = solution_vector(ins, values)
    assert np.array_equal(x, sol.x)


def test_solution_missing_columns_default_zero(built, tmp_path):
    _, ins, _ = built
    path = tmp_path / "sparse.sol"
    path.write_text("# partial\n" + ins.col_names[0] + " 1.5\n")
    values, _ = read_solution(path)
    x = solution_vector(ins, values)
    assert x[0] == 1.5
    assert np.count_nonzero(x) == 1


def test_solution_unknown_name_rejected(built, tmp_path):
    _, ins, _ = built
    path = tmp_path / "bad.sol"
    path.write_text("nope 1.0\n")
    values, _ = read_solution(path)
    with pytest.raises(MpsFormatError, match="nope"):
        solution_vector(ins, values)


def test_export_model_dispatch(built, tmp_path):
    _, ins, _ = built
    p1 = export_model(ins, "mps", tmp_path / "x.mps")
    p2 = export_model(ins, "lp", tmp_path / "x.lp")
    assert p1.endswith(".mps") and p2.endswith(".lp")
    with pytest.raises(MpsFormatError, match="format"):
        export_model(ins, "xlsx", tmp_path / "x.xlsx")


def test_mps_grammar_head(built, tmp_path):
    # scipy has no MPS reader; our own reader is the round-trip contract.
    # This test pins the grammar head so accidental format drift is caught.
    _, ins, _ = built
    path = tmp_path / "m.mps"
    write_mps(ins, path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("NAME")
    sections = [l for l in lines if l and not l[0].isspace()]
    assert sections[1:] == ["ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"]
    assert any("'MARKER'" in l and "'INTORG'" in l for l in lines)
