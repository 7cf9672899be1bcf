"""Exhaustive search over limited-contingency plans from one initial belief.

This is the baseline the solver is checked against, so it is deliberately
naive: it recurses over reachable beliefs, never reuses a value computed for
another node and never prunes with bounds. The one shortcut it takes is exact:
at a given belief, two branch protocols whose possible branches produce the
same (budget, posterior, likelihood) triples describe the same set of plans,
so only the first of them is searched.
"""

from __future__ import annotations

import time as _time
from dataclasses import dataclass

import numpy as np

from .model import ImpossibleObservation, PomdpModel, action_observation_update, as_belief, \
    subset_observation_update, transition_update
from .plan import (TIE_TOL, ActionNode, Branch, BranchNode, ContingentPlan, Leaf,
                   describe_condition, evaluate_plan)
from .protocols import enumerate_branch_protocols
from .solver import SolveConfig, solve, value_at

DEFAULT_NODE_CAP = 10_000_000


class ResourceLimitExceeded(RuntimeError):
    def __init__(self, count: int, cap: int):
        super().__init__(f"plan enumeration visited more than {cap} nodes "
                         f"(stopped at {count}); raise the cap or shrink the problem")
        self.count = count
        self.cap = cap


@dataclass
class EnumerationStats:
    plans_considered: int = 0
    nodes: int = 0
    seconds: float = 0.0


def enumerate_optimal(model: PomdpModel, config: SolveConfig, x0=None,
                      node_cap: int = DEFAULT_NODE_CAP):
    """Return ``(plan, value, stats)`` for the best plan within the budget."""
    config.validate_for(model)
    gamma = config.gamma(model)
    H = config.horizon
    x0 = model.start if x0 is None else as_belief(x0, model.n_states)
    protocols = [enumerate_branch_protocols(config, l, model.n_observations, model.n_actions)
                 for l in range(config.k + 1)]
    stats = EnumerationStats()
    start = _time.perf_counter()
    classes: dict = {}

    def representatives(x: np.ndarray, level: int):
        """First protocol of each equivalence class at ``x`` and the class size.

        Observations with zero probability under ``x`` have ``O(s, o) = 0`` on
        the support of ``x``, so conditions that agree on the possible
        observations yield the same posterior and likelihood.
        """
        if not protocols[level]:
            return ()
        if config.coupled:
            possible = tuple(tuple(np.flatnonzero((x @ model.transition[a]) @ model.observation_fn[a] > 0))
                             for a in range(model.n_actions))
        else:
            possible = (tuple(np.flatnonzero(x @ model.state_observation > 0)),)
        key = (level, possible)
        if key not in classes:
            groups: dict = {}
            for p in protocols[level]:
                live = set(possible[p.coupled_action or 0])
                sig = (p.coupled_action,
                       tuple(sorted((b, tuple(o for o in c.members if o in live))
                                    for c, b in zip(p.conditions, p.budgets))))
                if sig in groups:
                    groups[sig][1] += 1
                else:
                    groups[sig] = [p, 1]
            classes[key] = [tuple(g) for g in groups.values()]
        return classes[key]

    def search(x: np.ndarray, t: int, level: int):
        """(value, node, number of plans) for the subtree at this node."""
        stats.nodes += 1
        if stats.nodes > node_cap:
            raise ResourceLimitExceeded(stats.nodes, node_cap)
        if t == H:
            return 0.0, Leaf(), 1
        best_val, best_node, count = -np.inf, None, 0
        for a in range(model.n_actions):
            v, child, n = search(transition_update(model, x, a), t + 1, level)
            v = float(x @ model.reward[:, a]) + gamma * v
            count += n
            if v > best_val + TIE_TOL:
                best_val, best_node = v, ActionNode(model.actions[a], child)

        for p, size in representatives(x, level):
            outcomes = []
            for cond, budget in zip(p.conditions, p.budgets):
                try:
                    if p.coupled_action is None:
                        post, z = subset_observation_update(model, x, cond.members)
                    else:
                        post, z = action_observation_update(model, x, p.coupled_action, cond.members)
                except ImpossibleObservation:
                    continue
                outcomes.append((cond, budget, post, z))
            total, n_plans, branches, budgets = 0.0, 1, [], []
            next_t = t if p.coupled_action is None else t + 1
            for cond, budget, post, z in outcomes:
                v, child, n = search(post, next_t, budget)
                total += z * v
                n_plans *= n
                branches.append(Branch(describe_condition(model, cond), child))
                budgets.append(budget)
            count += size * n_plans
            if p.coupled_action is not None:
                total = float(x @ model.reward[:, p.coupled_action]) + gamma * total
            if total > best_val + TIE_TOL:
                action = None if p.coupled_action is None else model.actions[p.coupled_action]
                best_val = total
                best_node = BranchNode(tuple(branches), tuple(budgets), action)
        return best_val, best_node, count

    value, root, count = search(x0, 0, config.k)
    stats.plans_considered = count
    stats.seconds = _time.perf_counter() - start
    return ContingentPlan(root), value, stats


def estimate_nodes(model: PomdpModel, config: SolveConfig) -> int:
    """Upper bound on recursion nodes, ignoring impossible branches and
    equivalent protocols."""
    H = config.horizon
    protocols = [enumerate_branch_protocols(config, l, model.n_observations, model.n_actions)
                 for l in range(config.k + 1)]
    memo: dict = {}

    def count(t, level):
        if t == H:
            return 1
        key = (t, level)
        if key not in memo:
            n = 1 + model.n_actions * count(t + 1, level)
            for p in protocols[level]:
                nt = t if p.coupled_action is None else t + 1
                n += sum(count(nt, b) for b in p.budgets)
            memo[key] = n
        return memo[key]

    return count(0, config.k)


class Disagreement(AssertionError):
    def __init__(self, report: dict):
        super().__init__(f"solver value {report['okp_value']!r} and enumerator value "
                         f"{report['enum_value']!r} differ by {report['difference']:.3g}")
        self.report = report


def compare(model: PomdpModel, config: SolveConfig, x0=None, tol: float = 1e-9,
            node_cap: int = DEFAULT_NODE_CAP) -> dict:
    """Run both algorithms and check that their optimal values agree."""
    from .plan import extract

    x0 = model.start if x0 is None else as_belief(x0, model.n_states)
    policy = solve(model, config)
    okp_value = value_at(policy, x0)
    okp_plan = extract(policy, x0)
    enum_plan, enum_value, stats = enumerate_optimal(model, config, x0, node_cap)
    report = {
        "okp_value": okp_value,
        "enum_value": enum_value,
        "difference": abs(okp_value - enum_value),
        "okp_seconds": policy.seconds,
        "enum_seconds": stats.seconds,
        "alpha_vectors": policy.total_vectors,
        "enum_nodes": stats.nodes,
        "plans_considered": stats.plans_considered,
        "okp_plan": okp_plan,
        "enum_plan": enum_plan,
        "okp_plan_value": evaluate_plan(model, okp_plan, x0, policy.gamma),
    }
    if report["difference"] > tol:
        raise Disagreement(report)
    return report
