"""Contingent plan trees.

A plan alternates :class:`ActionNode` and :class:`BranchNode` records and
ends in :class:`Leaf` nodes at the horizon. Branches are labelled with
observation names (never beliefs), so a plan can be evaluated or executed
against the model alone.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Union

import numpy as np

from .model import (PROB_TOL, ImpossibleObservation, PomdpModel, action_observation_update,
                    as_belief, subset_observation_update, transition_update)
from .protocols import Condition

FORMAT_NAME = "kcontingency-plan"
FORMAT_VERSION = 1
TIE_TOL = 1e-10


class PlanError(ValueError):
    pass


@dataclass(frozen=True)
class BranchCondition:
    kind: str                               # observation | subset | threshold
    observations: tuple[str, ...] = ()
    threshold: str | None = None
    side: str | None = None                 # "le" or "gt" for thresholds

    def label(self) -> str:
        if self.kind == "threshold":
            return f"{'<=' if self.side == 'le' else '>'} {self.threshold}"
        return ",".join(self.observations)


@dataclass(frozen=True)
class Leaf:
    pass


@dataclass(frozen=True)
class ActionNode:
    action: str
    child: "PlanNode"


@dataclass(frozen=True)
class Branch:
    condition: BranchCondition
    subtree: "PlanNode"


@dataclass(frozen=True)
class BranchNode:
    branches: tuple[Branch, ...]
    budgets: tuple[int, ...] = ()
    action: str | None = None               # set when the branch follows an action


PlanNode = Union[Leaf, ActionNode, BranchNode]


@dataclass(frozen=True)
class ContingentPlan:
    root: PlanNode


@dataclass(frozen=True)
class PlanStructureReport:
    max_branch_points_per_path: int
    total_branch_points: int
    linear: bool


# -- conditions -------------------------------------------------------------

def describe_condition(model: PomdpModel, cond: Condition) -> BranchCondition:
    names = model.observations
    if cond.kind == "threshold":
        return BranchCondition("threshold", threshold=names[cond.split], side=cond.side)
    return BranchCondition(cond.kind, tuple(names[o] for o in cond.members))


def condition_members(model: PomdpModel, cond: BranchCondition) -> tuple[int, ...]:
    if cond.kind == "threshold":
        split = model.observation_index(cond.threshold)
        if cond.side == "le":
            return tuple(range(split + 1))
        if cond.side == "gt":
            return tuple(range(split + 1, model.n_observations))
        raise PlanError(f"threshold side must be 'le' or 'gt', got {cond.side!r}")
    if cond.kind not in ("observation", "subset"):
        raise PlanError(f"unknown condition kind {cond.kind!r}")
    if not cond.observations:
        raise PlanError("empty branch condition")
    return tuple(sorted(model.observation_index(o) for o in cond.observations))


# -- extraction -------------------------------------------------------------

def _tag_rank(tag):
    kinds = {"zero": 0, "action": 1, "coupled": 2, "branch": 3}
    return (kinds[tag.kind], tag.action, tag.protocol)


def choose_vector(stage, x: np.ndarray) -> int:
    """Best vector at ``x``; among near-ties prefer ordinary actions, then
    the lowest action index, then the lowest protocol index."""
    vals = stage.coeffs @ x
    tied = np.flatnonzero(vals >= vals.max() - TIE_TOL)
    return int(min(tied, key=lambda i: _tag_rank(stage.tags[i])))


def extract(policy, x0=None, level: int | None = None, time: int = 0) -> ContingentPlan:
    """Build the plan by simulating beliefs through the solved stages.

    Branches whose condition is impossible under the current belief are not
    built.
    """
    model = policy.model
    H = policy.horizon
    x0 = model.start if x0 is None else as_belief(x0, model.n_states)
    level = policy.k if level is None else level

    def build(l: int, t: int, x: np.ndarray) -> PlanNode:
        if t == H:
            return Leaf()
        stage = policy.stages[l][t]
        tag = stage.tags[choose_vector(stage, x)]
        if tag.kind == "action":
            a = tag.action
            return ActionNode(model.actions[a], build(l, t + 1, transition_update(model, x, a)))
        protocol = policy.protocols[l][tag.protocol]
        branches, budgets = [], []
        for cond, budget in zip(protocol.conditions, protocol.budgets):
            try:
                if tag.kind == "coupled":
                    post, _ = action_observation_update(model, x, tag.action, cond.members)
                    sub = build(budget, t + 1, post)
                else:
                    post, _ = subset_observation_update(model, x, cond.members)
                    sub = build(budget, t, post)
            except ImpossibleObservation:
                continue
            branches.append(Branch(describe_condition(model, cond), sub))
            budgets.append(budget)
        action = model.actions[tag.action] if tag.kind == "coupled" else None
        return BranchNode(tuple(branches), tuple(budgets), action)

    return ContingentPlan(build(level, time, x0))


# -- evaluation -------------------------------------------------------------

def evaluate_plan(model: PomdpModel, plan: ContingentPlan | PlanNode, x0=None,
                  gamma: float | None = None) -> float:
    """Exact expected cumulative reward of ``plan`` from belief ``x0``."""
    gamma = model.discount if gamma is None else gamma
    x0 = model.start if x0 is None else as_belief(x0, model.n_states)
    root = plan.root if isinstance(plan, ContingentPlan) else plan

    def value(node: PlanNode, x: np.ndarray) -> float:
        if isinstance(node, Leaf):
            return 0.0
        if isinstance(node, ActionNode):
            a = model.action_index(node.action)
            return float(x @ model.reward[:, a]) + gamma * value(node.child, transition_update(model, x, a))
        if not isinstance(node, BranchNode):
            raise PlanError(f"unknown plan node {node!r}")
        a = None if node.action is None else model.action_index(node.action)
        covered: set[int] = set()
        total = 0.0
        for br in node.branches:
            members = condition_members(model, br.condition)
            if covered.intersection(members):
                raise PlanError("branch conditions overlap")
            covered.update(members)
            try:
                if a is None:
                    post, z = subset_observation_update(model, x, members)
                else:
                    post, z = action_observation_update(model, x, a, members)
            except ImpossibleObservation:
                continue
            total += z * value(br.subtree, post)
        missing = tuple(o for o in range(model.n_observations) if o not in covered)
        if missing:
            try:
                if a is None:
                    _, z = subset_observation_update(model, x, missing)
                else:
                    _, z = action_observation_update(model, x, a, missing)
            except ImpossibleObservation:
                z = 0.0
            if z >= PROB_TOL:
                raise PlanError("a possible observation has no branch: "
                                + ",".join(model.observations[o] for o in missing))
        if a is None:
            return total
        return float(x @ model.reward[:, a]) + gamma * total

    return value(root, x0)


# -- structure --------------------------------------------------------------

def _children(node: PlanNode):
    if isinstance(node, ActionNode):
        return [node.child]
    if isinstance(node, BranchNode):
        return [b.subtree for b in node.branches]
    return []


def analyze_structure(plan: ContingentPlan | PlanNode) -> PlanStructureReport:
    root = plan.root if isinstance(plan, ContingentPlan) else plan

    def walk(node):
        """(max per path, total, contains a branch, linear)."""
        kids = [walk(c) for c in _children(node)]
        per_path = max((k[0] for k in kids), default=0)
        total = sum(k[1] for k in kids)
        linear = all(k[3] for k in kids)
        if isinstance(node, BranchNode):
            if sum(1 for k in kids if k[2]) > 1:
                linear = False
            return per_path + 1, total + 1, True, linear
        return per_path, total, any(k[2] for k in kids), linear

    per_path, total, _, linear = walk(root)
    return PlanStructureReport(per_path, total, linear)


def satisfies_variant(report: PlanStructureReport, variant: str, k: int) -> bool:
    if variant == "balanced":
        return report.max_branch_points_per_path <= k
    if variant == "linear":
        return report.linear and report.total_branch_points <= k
    if variant == "general":
        return report.total_branch_points <= k
    raise ValueError(f"unknown variant {variant!r}")


def plan_depth(plan: ContingentPlan | PlanNode) -> int:
    """Time steps along the longest path (coupled branches count one step)."""
    root = plan.root if isinstance(plan, ContingentPlan) else plan

    def depth(node):
        step = 1 if isinstance(node, ActionNode) or (isinstance(node, BranchNode) and node.action) else 0
        return step + max((depth(c) for c in _children(node)), default=0)

    return depth(root)


def validate_plan(model: PomdpModel, plan: ContingentPlan, horizon: int | None = None) -> None:
    """Raise :class:`PlanError` unless every name resolves, branch conditions
    are disjoint and the plan fits in ``horizon`` steps."""
    def check(node):
        if isinstance(node, ActionNode):
            _resolve(model.action_index, node.action)
        elif isinstance(node, BranchNode):
            if node.action is not None:
                _resolve(model.action_index, node.action)
            seen: set[int] = set()
            for br in node.branches:
                members = set(_resolve(condition_members, model, br.condition))
                if seen & members:
                    raise PlanError("branch conditions overlap")
                seen |= members
        elif not isinstance(node, Leaf):
            raise PlanError(f"unknown plan node {node!r}")
        for c in _children(node):
            check(c)

    check(plan.root)
    if horizon is not None and plan_depth(plan) > horizon:
        raise PlanError(f"plan needs {plan_depth(plan)} steps, horizon is {horizon}")


def _resolve(fn, *args):
    try:
        return fn(*args)
    except (KeyError, ValueError) as exc:
        if isinstance(exc, PlanError):
            raise
        raise PlanError(str(exc)) from None


# -- serialization ----------------------------------------------------------

def _cond_to_dict(c: BranchCondition) -> dict:
    if c.kind == "observation":
        return {"kind": "observation", "observation": c.observations[0]}
    if c.kind == "subset":
        return {"kind": "subset", "observations": list(c.observations)}
    return {"kind": "threshold", "threshold": c.threshold, "side": c.side}


def _cond_from_dict(d: dict) -> BranchCondition:
    kind = d.get("kind")
    try:
        if kind == "observation":
            return BranchCondition("observation", (str(d["observation"]),))
        if kind == "subset":
            return BranchCondition("subset", tuple(str(o) for o in d["observations"]))
        if kind == "threshold":
            if d["side"] not in ("le", "gt"):
                raise PlanError(f"bad threshold side {d['side']!r}")
            return BranchCondition("threshold", threshold=str(d["threshold"]), side=d["side"])
    except KeyError as exc:
        raise PlanError(f"condition {d!r} is missing field {exc}") from None
    raise PlanError(f"unknown condition kind {kind!r}")


def node_to_dict(node: PlanNode) -> dict:
    if isinstance(node, Leaf):
        return {"type": "leaf"}
    if isinstance(node, ActionNode):
        return {"type": "action", "action": node.action, "child": node_to_dict(node.child)}
    if isinstance(node, BranchNode):
        out = {"type": "branch"}
        if node.action is not None:
            out["action"] = node.action
        out["budgets"] = list(node.budgets)
        out["branches"] = [{"condition": _cond_to_dict(b.condition),
                            "subtree": node_to_dict(b.subtree)} for b in node.branches]
        return out
    raise PlanError(f"unknown plan node {node!r}")


def node_from_dict(d, path: str = "root") -> PlanNode:
    if not isinstance(d, dict):
        raise PlanError(f"{path}: expected an object")
    kind = d.get("type")
    try:
        if kind == "leaf":
            return Leaf()
        if kind == "action":
            return ActionNode(str(d["action"]), node_from_dict(d["child"], path + ".child"))
        if kind == "branch":
            branches = tuple(
                Branch(_cond_from_dict(b["condition"]),
                       node_from_dict(b["subtree"], f"{path}.branches[{i}]"))
                for i, b in enumerate(d["branches"]))
            action = d.get("action")
            return BranchNode(branches, tuple(int(v) for v in d.get("budgets", ())),
                              None if action is None else str(action))
    except KeyError as exc:
        raise PlanError(f"{path}: {kind} node is missing field {exc}") from None
    raise PlanError(f"{path}: unknown node type {kind!r}")


def dumps(plan: ContingentPlan) -> str:
    doc = {"format": FORMAT_NAME, "version": FORMAT_VERSION, "root": node_to_dict(plan.root)}
    return json.dumps(doc, indent=2) + "\n"


def loads(text: str) -> ContingentPlan:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PlanError(f"malformed plan document: {exc}") from None
    if not isinstance(doc, dict) or "root" not in doc:
        raise PlanError("malformed plan document: no 'root'")
    if doc.get("format", FORMAT_NAME) != FORMAT_NAME:
        raise PlanError(f"unexpected format {doc.get('format')!r}")
    return ContingentPlan(node_from_dict(doc["root"]))


def save(plan: ContingentPlan, path) -> None:
    with open(path, "w") as f:
        f.write(dumps(plan))


def load(path) -> ContingentPlan:
    with open(path) as f:
        return loads(f.read())


def to_dot(plan: ContingentPlan, name: str = "plan") -> str:
    """Graphviz rendering: boxes for actions, diamonds for branch points."""
    lines = [f"digraph {name} {{", "  node [fontname=Helvetica];"]
    counter = iter(range(1 << 30))

    def emit(node) -> str:
        nid = f"n{next(counter)}"
        if isinstance(node, Leaf):
            lines.append(f'  {nid} [shape=point];')
        elif isinstance(node, ActionNode):
            lines.append(f'  {nid} [shape=box, label="{node.action}"];')
            lines.append(f"  {nid} -> {emit(node.child)};")
        else:
            label = "branch" if node.action is None else f"{node.action} + branch"
            lines.append(f'  {nid} [shape=diamond, label="{label}"];')
            for br in node.branches:
                lines.append(f'  {nid} -> {emit(br.subtree)} [label="{br.condition.label()}"];')
        return nid

    emit(plan.root)
    lines.append("}")
    return "\n".join(lines) + "\n"
