import math

import numpy as np
import pytest

from rcinet import (LpProblem, LpStatus, add_l1_objective, from_mps, solve,
                    to_mps)


def test_minimize_with_lower_bound():
    p = LpProblem()
    x = p.add_var(lb=1.0)
    p.add_objective_term(x, 1.0)
    sol = solve(p)
    assert sol.status is LpStatus.OPTIMAL
    assert abs(sol.objective - 1.0) < 1e-9
    assert abs(sol.x[x] - 1.0) < 1e-9


def test_contradictory_rows_infeasible():
    p = LpProblem()
    x = p.add_var()
    p.add_ineq({x: 1.0}, 0.0)    # x <= 0
    p.add_ineq({x: -1.0}, -1.0)  # x >= 1
    assert solve(p).status is LpStatus.INFEASIBLE


def test_free_descent_unbounded():
    p = LpProblem()
    x = p.add_var()
    p.add_objective_term(x, -1.0)
    assert solve(p).status is LpStatus.UNBOUNDED


def test_zero_variable_problem():
    p = LpProblem()
    assert solve(p).status is LpStatus.OPTIMAL


def test_solution_respects_residual_contract():
    p = LpProblem()
    xs = p.add_block("x", 3)
    p.add_eq({xs[0]: 1.0, xs[1]: 2.0, xs[2]: -1.0}, 4.0)
    p.add_eq({xs[0]: 1.0, xs[2]: 1.0}, 1.0)
    for v in xs:
        p.add_objective_term(v, 1.0)
    p.add_ineq({xs[1]: -1.0}, 0.0)
    sol = solve(p, feas_tol=1e-7)
    assert sol.optimal
    resid = abs(sol.x[0] + 2 * sol.x[1] - sol.x[2] - 4.0)
    assert max(resid, abs(sol.x[0] + sol.x[2] - 1.0)) <= 1e-7


def test_determinism_same_problem_same_answer():
    def build():
        p = LpProblem()
        xs = p.add_block("x", 4, lb=-5.0, ub=5.0)
        p.add_eq({xs[0]: 1.0, xs[1]: 1.0, xs[2]: 0.5}, 2.0)
        p.add_ineq({xs[1]: 1.0, xs[3]: -2.0}, 1.0)
        for i, v in enumerate(xs):
            p.add_objective_term(v, 1.0 + 0.1 * i)
        return p

    sols = [solve(build()) for _ in range(3)]
    assert all(s.status is LpStatus.OPTIMAL for s in sols)
    assert max(s.objective for s in sols) - min(s.objective for s in sols) <= 1e-9
    assert np.allclose(sols[0].x, sols[1].x) and np.allclose(sols[1].x, sols[2].x)


def test_objective_scaling():
    def build(scale):
        p = LpProblem()
        x = p.add_var(lb=2.0)
        y = p.add_var(lb=3.0)
        p.add_objective_term(x, scale * 1.0)
        p.add_objective_term(y, scale * 2.0)
        return p

    base = solve(build(1.0)).objective
    scaled = solve(build(7.0)).objective
    assert abs(scaled / base - 7.0) < 1e-9


# -- 1-norm linearization -------------------------------------------------


def test_l1_single_negative_value():
    p = LpProblem()
    x = p.add_block("x", 1)
    p.add_eq({x[0]: 1.0}, -3.0)
    add_l1_objective(p, x)
    sol = solve(p)
    assert abs(sol.objective - 3.0) < 1e-8


def test_l1_two_pinned_values():
    p = LpProblem()
    xs = p.add_block("x", 2)
    p.add_eq({xs[0]: 1.0}, 1.0)
    p.add_eq({xs[1]: 1.0}, -2.0)
    add_l1_objective(p, xs)
    sol = solve(p)
    assert abs(sol.objective - 3.0) < 1e-8


def test_l1_minimum_over_feasible_line():
    # oracle: enumerate the basic solutions of x + y = 2 within the box
    # [-10, 10]^2; the 1-norm minimum over the segment is 2
    corners = []
    for x in (-10.0, 10.0):
        corners.append((x, 2.0 - x))
    for y in (-10.0, 10.0):
        corners.append((2.0 - y, y))
    corners.append((2.0, 0.0))
    corners.append((0.0, 2.0))
    feasible = [c for c in corners if max(map(abs, c)) <= 10.0]
    oracle = min(abs(x) + abs(y) for x, y in feasible)
    assert oracle == 2.0

    p = LpProblem()
    xs = p.add_block("x", 2, lb=-10.0, ub=10.0)
    p.add_eq({xs[0]: 1.0, xs[1]: 1.0}, 2.0)
    add_l1_objective(p, xs)
    sol = solve(p)
    assert abs(sol.objective - oracle) < 1e-8
    assert p.num_vars == 4  # grew by the block size


def test_l1_grows_variable_count_and_returns_problem():
    p = LpProblem()
    xs = p.add_block("x", 3)
    out = add_l1_objective(p, xs)
    assert out is p
    assert p.num_vars == 6


# -- validation -----------------------------------------------------------


def test_rejects_bad_rows():
    p = LpProblem()
    p.add_var()
    with pytest.raises(ValueError):
        p.add_eq({5: 1.0}, 0.0)
    with pytest.raises(ValueError):
        p.add_eq({0: float("nan")}, 0.0)
    with pytest.raises(ValueError):
        p.add_var(lb=2.0, ub=1.0)
    with pytest.raises(ValueError):
        p.add_block("x", 2)
        p.add_block("x", 2)


# -- MPS debug round trip ---------------------------------------------------


def build_varied_problem():
    p = LpProblem()
    xs = p.add_block("T", 3)
    ys = p.add_block("M", 2, lb=0.0)
    z = p.add_var(lb=-1.25, ub=2.5)
    w = p.add_var(lb=-math.inf, ub=4.0)
    p.add_eq({xs[0]: 1.0, ys[0]: -0.3333333333333333}, 1.0)
    p.add_eq({xs[1]: 2.0, xs[2]: -1.0, z: 0.1}, 0.0)
    p.add_ineq({ys[1]: 1.0, w: 5e-7}, 0.25)
    p.add_ineq({xs[0]: -1.0}, 0.0)
    p.add_objective_term(xs[0], 1.0)
    p.add_objective_term(z, -2.7182818284590455)
    return p


def test_mps_round_trip_identity():
    p = build_varied_problem()
    back = from_mps(to_mps(p))
    assert back == p
    # and the dump is stable: dumping the reparse reproduces the text
    assert to_mps(back) == to_mps(p)


def test_mps_round_trip_preserves_solution():
    p = build_varied_problem()
    a, b = solve(p), solve(from_mps(to_mps(p)))
    assert a.status == b.status
    assert abs(a.objective - b.objective) <= 1e-9


def test_mps_sections_present():
    text = to_mps(build_varied_problem())
    for token in ("NAME", "ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA",
                  "* BLOCK T", "* BLOCK M"):
        assert token in text
