import numpy as np
import pytest
import scipy.sparse as sp
from scipy.optimize import linprog

from microplan.simplex import BoundedSimplex, solve_lp


def _reference(A, senses, rhs, c, lb, ub):
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for i, s in enumerate(senses):
        if s == "L":
            A_ub.append(A[i]); b_ub.append(rhs[i])
        elif s == "G":
            A_ub.append(-A[i]); b_ub.append(-rhs[i])
        else:
            A_eq.append(A[i]); b_eq.append(rhs[i])
    res = linprog(c, A_ub=np.array(A_ub) if A_ub else None, b_ub=b_ub or None,
                  A_eq=np.array(A_eq) if A_eq else None, b_eq=b_eq or None,
                  bounds=list(zip(lb, ub)), method="highs")
    status = {0: "optimal", 2: "infeasible", 3: "unbounded"}.get(res.status, "?")
    return status, (res.fun if res.status == 0 else None)


def test_bound_active_minimum():
    # min x subject to x >= 3
    res = solve_lp(sp.csr_matrix(np.array([[1.0]])), ["G"], [3.0], [1.0],
                   [0.0], [np.inf])
    assert res.status == "optimal"
    assert res.objective == pytest.approx(3.0, abs=1e-9)


def test_infeasible_bounds():
    res = solve_lp(sp.csr_matrix(np.array([[1.0]])), ["L"], [1.0], [1.0],
                   [2.0], [3.0])
    assert res.status == "infeasible"


def test_unbounded():
    res = solve_lp(sp.csr_matrix(np.array([[1.0, 1.0]])), ["G"], [1.0],
                   [-1.0, 0.0], [0.0, 0.0], [np.inf, np.inf])
    assert res.status == "unbounded"


def test_equality_system():
    # x + y = 2, x - y = 0 -> x = y = 1
    A = np.array([[1.0, 1.0], [1.0, -1.0]])
    res = solve_lp(sp.csr_matrix(A), ["E", "E"], [2.0, 0.0], [1.0, 1.0],
                   [0.0, 0.0], [10.0, 10.0])
    assert res.status == "optimal"
    assert res.x == pytest.approx([1.0, 1.0], abs=1e-9)


def test_negative_lower_bounds():
    # min x + 2y with x + y >= -3: y sinks to -5, x rises to 2
    res = solve_lp(sp.csr_matrix(np.array([[1.0, 1.0]])), ["G"], [-3.0],
                   [1.0, 2.0], [-5.0, -5.0], [5.0, 5.0])
    assert res.status == "optimal"
    assert res.objective == pytest.approx(-8.0, abs=1e-9)


def test_degenerate_transport():
    # classic degenerate structure: duplicate constraints
    A = np.array([[1.0, 1.0], [1.0, 1.0], [1.0, 0.0]])
    res = solve_lp(sp.csr_matrix(A), ["L", "L", "L"], [4.0, 4.0, 2.0],
                   [-3.0, -2.0], [0.0, 0.0], [np.inf, np.inf])
    assert res.status == "optimal"
    assert res.objective == pytest.approx(-10.0, abs=1e-9)  # x=2, y=2


@pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
def test_randomized_against_reference(seed):
    rng = np.random.default_rng(seed)
    for _ in range(40):
        m = int(rng.integers(1, 25))
        n = int(rng.integers(1, 30))
        density = rng.uniform(0.15, 0.7)
        A = np.round(rng.uniform(-3, 3, (m, n)) * (rng.random((m, n)) < density), 3)
        senses = rng.choice(["L", "E", "G"], m, p=[0.5, 0.2, 0.3])
        x0 = rng.uniform(0, 2, n)
        rhs = np.round(A @ x0 + np.where(senses == "L", rng.uniform(0, 2, m),
                       np.where(senses == "G", -rng.uniform(0, 2, m), 0.0)), 3)
        c = np.round(rng.uniform(-2, 2, n), 3)
        lb = np.round(rng.uniform(-1, 0.5, n), 2)
        ub = lb + np.round(rng.uniform(0.5, 5, n), 2)
        ub[rng.random(n) < 0.15] = np.inf
        got = solve_lp(sp.csr_matrix(A), senses, rhs, c, lb, ub)
        want_status, want_obj = _reference(A, senses, rhs, c, lb, ub)
        assert got.status == want_status
        if want_status == "optimal":
            assert got.objective == pytest.approx(
                want_obj, rel=1e-6, abs=1e-6)
            # primal feasibility of the reported point
            act = A @ got.x
            for i, s in enumerate(senses):
                if s == "L":
                    assert act[i] <= rhs[i] + 1e-7
                elif s == "G":
                    assert act[i] >= rhs[i] - 1e-7
                else:
                    assert act[i] == pytest.approx(rhs[i], abs=1e-7)
            assert np.all(got.x >= lb - 1e-9)
            assert np.all(got.x <= ub + 1e-9)


def test_engine_reuse_under_varying_bounds():
    rng = np.random.default_rng(9)
    m, n = 10, 14
    A = np.round(rng.uniform(-2, 2, (m, n)) * (rng.random((m, n)) < 0.5), 3)
    senses = np.array(["L"] * 5 + ["G"] * 3 + ["E"] * 2)
    x0 = rng.uniform(0, 1, n)
    rhs = A @ x0 + np.where(senses == "L", 1.0, np.where(senses == "G", -1.0, 0.0))
    c = rng.uniform(-1, 1, n)
    engine = BoundedSimplex(sp.csr_matrix(A), senses, rhs, c)
    for trial in range(25):
        lb = np.zeros(n)
        ub = rng.uniform(0.5, 3.0, n)
        fixed = rng.random(n) < 0.3
        lb[fixed] = ub[fixed] = np.round(rng.uniform(0, 1, n), 1)[fixed]
        got = engine.solve(lb, ub)
        want_status, want_obj = _reference(A, senses, rhs, c, lb, ub)
        assert got.status == want_status
        if want_status == "optimal":
            assert got.objective == pytest.approx(want_obj, rel=1e-6, abs=1e-6)


def test_deterministic():
    rng = np.random.default_rng(5)
    A = np.round(rng.uniform(-2, 2, (8, 12)), 3)
    senses = ["L"] * 8
    rhs = np.abs(A).sum(axis=1)
    c = np.round(rng.uniform(-1, 1, 12), 3)
    lb, ub = np.zeros(12), np.full(12, 4.0)
    r1 = solve_lp(sp.csr_matrix(A), senses, rhs, c, lb, ub)
    r2 = solve_lp(sp.csr_matrix(A), senses, rhs, c, lb, ub)
    assert r1.objective == r2.objective
    assert np.array_equal(r1.x, r2.x)
    assert r1.iterations == r2.iterations
