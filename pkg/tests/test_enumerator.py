import numpy as np
import pytest

from kcontingency.enumerator import (Disagreement, ResourceLimitExceeded, compare,
                                     enumerate_optimal, estimate_nodes)
from kcontingency.plan import (ActionNode, BranchNode, Leaf, analyze_structure, evaluate_plan,
                               satisfies_variant)
from kcontingency.solver import SolveConfig

from conftest import random_beliefs


def test_conformant_tiger(tiger):
    plan, value, stats = enumerate_optimal(tiger, SolveConfig(2, 0))
    assert value == pytest.approx(-2)
    assert stats.plans_considered == 9
    assert plan.root == ActionNode("listen", ActionNode("listen", Leaf()))


def test_one_branch_tiger(tiger):
    plan, value, _ = enumerate_optimal(tiger, SolveConfig(1, 1))
    assert value == pytest.approx(3.6)
    assert isinstance(plan.root, BranchNode)
    assert [b.subtree.action for b in plan.root.branches] == ["open-right", "open-left"]


def test_two_branch_tiger(tiger):
    plan, value, _ = enumerate_optimal(tiger, SolveConfig(2, 2))
    assert value == pytest.approx(7.2)
    assert evaluate_plan(tiger, plan) == pytest.approx(7.2)


@pytest.mark.parametrize("variant", ["balanced", "linear", "general"])
def test_returned_plan_is_consistent(maze, variant):
    for k in (1, 2):
        plan, value, _ = enumerate_optimal(maze, SolveConfig(4, k, variant, "binary"))
        assert evaluate_plan(maze, plan) == pytest.approx(value, abs=1e-9)
        assert satisfies_variant(analyze_structure(plan), variant, k)


def test_monotone_in_k_and_h(maze):
    values = np.array([[enumerate_optimal(maze, SolveConfig(H, k))[1] for H in range(1, 6)]
                       for k in range(3)])
    assert np.all(np.diff(values, axis=0) >= -1e-9)
    assert np.all(np.diff(values, axis=1) >= -1e-9)


def test_resource_guard(grid):
    with pytest.raises(ResourceLimitExceeded) as err:
        enumerate_optimal(grid, SolveConfig(6, 0), node_cap=500)
    assert err.value.cap == 500 and err.value.count == 501
    assert "500" in str(err.value)


def test_estimate_bounds_actual_nodes(tiger, maze):
    for model, config in ((tiger, SolveConfig(3, 1)), (maze, SolveConfig(3, 2, "general", "binary")),
                          (tiger, SolveConfig(2, 0))):
        _, _, stats = enumerate_optimal(model, config)
        assert stats.nodes <= estimate_nodes(model, config)
    assert estimate_nodes(tiger, SolveConfig(2, 0)) == 1 + 3 + 9


def test_compare_reports(tiger):
    report = compare(tiger, SolveConfig(2, 1))
    assert report["okp_value"] == pytest.approx(2.6) and report["enum_value"] == pytest.approx(2.6)
    assert report["difference"] <= 1e-9
    assert report["okp_plan_value"] == pytest.approx(2.6)
    assert report["alpha_vectors"] > 0 and report["enum_nodes"] > 0


def test_compare_raises_on_disagreement(tiger, monkeypatch):
    import kcontingency.enumerator as enum
    monkeypatch.setattr(enum, "value_at", lambda policy, x=None: 100.0)
    with pytest.raises(Disagreement) as err:
        compare(tiger, SolveConfig(1, 1))
    assert err.value.report["enum_plan"] is not None
    assert err.value.report["okp_value"] == 100.0


def test_random_start_beliefs(maze):
    from kcontingency.solver import solve, value_at
    config = SolveConfig(3, 1, "general", "full")
    policy = solve(maze, config)
    for x in random_beliefs(maze.n_states, 10, seed=9):
        assert enumerate_optimal(maze, config, x)[1] == pytest.approx(value_at(policy, x), abs=1e-9)
