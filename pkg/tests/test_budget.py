import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mtal.budget import (
    AnnotationCosts,
    BudgetProgram,
    compute_costs,
    eqb_djs_select,
    greedy_budgeted_select,
    solve_blp_exact,
    solve_joint_blp,
    solve_stcs_blp,
    solve_udjs_blp,
)
from mtal.errors import UnsupportedConfigurationError, ValidationError

from oracles import enumerate_knapsack, enumerate_udjs, enumerate_udjs_fast


def instance(rng, n, t=2):
    m = rng.integers(1, 15, size=n)
    nt = rng.integers(0, m + 1)
    u = np.round(rng.random((n, t)), 3)
    return u, compute_costs(m, nt)


def test_cost_formulas():
    c = compute_costs([5, 3], [2, 0], tp=1, ts=3)
    np.testing.assert_array_equal(c.cost_sf, [7, 3])
    np.testing.assert_array_equal(c.cost_id, [8, 6])
    np.testing.assert_array_equal(c.jcost, [10, 6])
    c2 = compute_costs([5], [2], tp=2.5, ts=0.5)
    assert c2.jcost[0] == 5 + 2.5 * 2 + 0.5
    with pytest.raises(ValidationError):
        compute_costs([0], [0])
    with pytest.raises(ValidationError):
        compute_costs([3], [-1])


def test_greedy_skips_and_continues():
    costs = np.array([6.0, 8.0, 2.0, 3.0])
    result = greedy_budgeted_select([0.1, 0.2, 0.3, 0.4], costs, 10)
    # 0 fits (6), 1 does not (8 > 4), 2 fits (2), 3 does not (3 > 2)
    assert result.ids == [0, 2]
    assert result.total_cost == 8


def test_exact_solver_simple_knapsack():
    res = solve_blp_exact([6, 10, 12], [1, 2, 3], 5)
    assert res.optimal
    assert res.objective == 22
    np.testing.assert_array_equal(res.flags, [False, True, True])


def test_exact_solver_prefers_lexicographically_smallest_optimum():
    res = solve_blp_exact([1.0, 1.0, 1.0], [1, 1, 1], 2)
    assert res.objective == 2
    # any two items are optimal; 0 < 1 per position, so 011 is the smallest vector
    assert res.flags.tolist() == [False, True, True]
    assert solve_blp_exact([1.0, 2.0, 1.0], [1, 2, 1], 2).flags.tolist() == [False, True, False]


def test_exact_solver_edge_cases():
    assert solve_blp_exact([], [], 10).objective == 0
    res = solve_blp_exact([0.5, 0.2], [11, 12], 10)
    assert res.objective == 0 and not res.flags.any()
    res = solve_blp_exact([0.5, 0.2], [0, 0], 0)
    assert res.objective == pytest.approx(0.7)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 12), st.integers(0, 2**32 - 1))
def test_joint_matches_enumeration(n, seed):
    rng = np.random.default_rng(seed)
    u, costs = instance(rng, n)
    budget = int(rng.integers(0, 100))
    sol = solve_joint_blp(u[:, 0], costs, budget)
    assert sol.optimal
    assert sol.objective == pytest.approx(enumerate_knapsack(u[:, 0], costs.jcost, budget), abs=1e-9)
    assert sol.total_cost <= budget


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 5), st.integers(0, 2**32 - 1))
def test_udjs_matches_enumeration(n, seed):
    rng = np.random.default_rng(seed)
    u, costs = instance(rng, n)
    budget = int(rng.integers(0, 80))
    sol = solve_udjs_blp(u, costs, budget)
    best = enumerate_udjs(u, costs.task_costs(), costs.jcost, budget)
    assert sol.optimal
    assert sol.objective == pytest.approx(best, abs=1e-9)
    assert sol.total_cost <= budget
    # Y only where both tasks are chosen, and always there
    np.testing.assert_array_equal(sol.y, sol.x.all(axis=1))


def test_fast_udjs_oracle_agrees_with_loop_oracle():
    rng = np.random.default_rng(11)
    for _ in range(20):
        u, costs = instance(rng, int(rng.integers(1, 5)))
        budget = int(rng.integers(0, 60))
        args = (u, costs.task_costs(), costs.jcost, budget)
        assert enumerate_udjs_fast(*args) == pytest.approx(enumerate_udjs(*args), abs=1e-12)


def test_udjs_beats_joint_when_one_task_is_cheap():
    u = np.array([[0.0, 0.9], [0.0, 0.9], [0.9, 0.0]])
    costs = compute_costs([4, 4, 4], [4, 4, 4])  # cost_sf 8, cost_id 7, jcost 11
    udjs = solve_udjs_blp(u, costs, 22)
    joint = solve_joint_blp(u.sum(axis=1) / 2, costs, 22)
    assert udjs.objective == pytest.approx(2.7)
    assert udjs.x.tolist() == [[False, True], [False, True], [True, False]]
    # joint annotation fits only two examples (2 x 11) and earns 0.9 each
    assert joint.objective == pytest.approx(0.9)


def test_udjs_accepts_raw_cost_arrays():
    u = np.array([[0.5, 0.5]])
    sol = solve_udjs_blp(u, (np.array([[3.0, 4.0]]), np.array([5.0])), 5)
    assert sol.objective == 1.0
    assert sol.total_cost == 5.0


def test_eqb_djs_splits_budget_and_stays_within():
    rng = np.random.default_rng(2)
    for _ in range(30):
        u, costs = instance(rng, 12)
        budget = int(rng.integers(10, 120))
        sol = eqb_djs_select(u, costs, budget)
        assert sol.total_cost <= budget
        np.testing.assert_array_equal(sol.y, sol.x.all(axis=1))
        assert sol.history and sol.history[-1] == sol.total_cost
        assert sol.objective <= solve_udjs_blp(u, costs, budget).objective + 1e-9


def test_eqb_djs_reinvests_freed_budget():
    # both tasks want example 0; the joint discount frees budget for a second round
    u = np.array([[0.9, 0.9], [0.5, 0.0], [0.0, 0.5]])
    costs = compute_costs([4, 3, 3], [0, 0, 0])  # cost_sf 4/3/3, cost_id 7/6/6, jcost 7/6/6
    sol = eqb_djs_select(u, costs, 14)
    assert len(sol.history) >= 2
    assert sol.x[0].all()
    assert sol.total_cost <= 14


def test_eqb_djs_requires_two_tasks():
    with pytest.raises(UnsupportedConfigurationError):
        eqb_djs_select(np.zeros((2, 3)), compute_costs([1, 1], [0, 0]), 5)


def test_stcs_uses_one_task():
    u = np.array([[0.9, 0.0], [0.0, 0.9]])
    costs = compute_costs([1, 1], [0, 0])
    assert solve_stcs_blp(u, costs, 4, task=0).selection().ids == [0]
    assert solve_stcs_blp(u, costs, 4, task=1).selection().ids == [1]


def test_node_limit_reports_non_optimal():
    rng = np.random.default_rng(9)
    values = rng.random(40)
    costs = rng.integers(10, 30, size=40)
    res = solve_blp_exact(values, costs, 200, node_limit=3)
    assert not res.optimal
    assert costs[res.flags].sum() <= 200


def test_uncertainty_must_be_in_unit_interval():
    with pytest.raises(ValidationError):
        solve_joint_blp([1.5], [1], 3)


def test_budget_program_round_trip():
    rng = np.random.default_rng(4)
    u, costs = instance(rng, 9)
    program = BudgetProgram("UDJS", list(range(100, 109)), u, costs.m, costs.nt, budget=40)
    again = BudgetProgram.from_json(program.to_json())
    assert again.to_json() == program.to_json()
    a, b = program.solve(), again.solve()
    assert a.to_dict() == b.to_dict()
    assert json.loads(json.dumps(a.to_dict()))["examples"][0]["id"] == 100
    with pytest.raises(ValidationError):
        BudgetProgram.from_json('{"formulation": "UDJS"}')
    with pytest.raises(ValidationError):
        BudgetProgram("STCS", [0], [[0.1, 0.2]], [1], [0])


def test_annotation_costs_subset():
    c = AnnotationCosts(np.array([3, 4, 5]), np.array([0, 1, 2]))
    np.testing.assert_array_equal(c.subset([2, 0]).jcost, [10, 6])
