"""Branch conditions and observe-and-branch protocols."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Sequence

VARIANTS = ("balanced", "linear", "general")
BRANCH_MODES = ("full", "binary", "threshold")


@dataclass(frozen=True, order=True)
class Condition:
    """The set of observation indices one outgoing branch is taken on.

    ``kind`` is ``"observation"`` (a singleton), ``"subset"`` or
    ``"threshold"``. For threshold conditions ``split`` is the index of the
    threshold observation and ``side`` is ``"le"`` or ``"gt"``.
    """

    members: tuple[int, ...]
    kind: str = "observation"
    split: int = -1
    side: str = ""


@dataclass(frozen=True)
class BranchProtocol:
    conditions: tuple[Condition, ...]
    budgets: tuple[int, ...]
    coupled_action: int | None = None

    def __post_init__(self):
        if len(self.conditions) != len(self.budgets):
            raise ValueError("one budget per condition is required")

    def key(self):
        return (tuple(c.members for c in self.conditions), self.budgets,
                -1 if self.coupled_action is None else self.coupled_action)


def condition_partitions(mode: str, n_obs: int) -> list[tuple[Condition, ...]]:
    """Every way of splitting the observation set allowed by ``mode``."""
    obs = tuple(range(n_obs))
    if mode == "full":
        return [tuple(Condition((o,)) for o in obs)]
    if mode == "binary":
        out = []
        for mask in range(1, 2 ** n_obs - 1):
            inside = tuple(o for o in obs if mask >> o & 1)
            outside = tuple(o for o in obs if not mask >> o & 1)
            out.append((Condition(inside, "subset"), Condition(outside, "subset")))
        return out
    if mode == "threshold":
        return [(Condition(obs[:t + 1], "threshold", t, "le"),
                 Condition(obs[t + 1:], "threshold", t, "gt")) for t in range(n_obs - 1)]
    raise ValueError(f"unknown branch mode {mode!r}")


def budget_assignments(variant: str, level: int, n_conditions: int) -> list[tuple[int, ...]]:
    """How the ``level - 1`` remaining branch points go to the branches."""
    rest = level - 1
    if variant == "balanced":
        return [(rest,) * n_conditions]
    if variant == "linear":
        return [tuple(rest if i == j else 0 for i in range(n_conditions))
                for j in range(n_conditions)]
    if variant == "general":
        return [c for c in product(range(rest + 1), repeat=n_conditions) if sum(c) == rest]
    raise ValueError(f"unknown variant {variant!r}")


def enumerate_branch_protocols(config, level: int, n_observations: int,
                               n_actions: int | None = None) -> list[BranchProtocol]:
    """All observe-and-branch protocols available with ``level`` branch points.

    In coupled mode every protocol is paired with each of the ``n_actions``
    ordinary actions.
    """
    if level < 1:
        return []
    protocols = []
    for conds in condition_partitions(config.branch_mode, n_observations):
        for budgets in budget_assignments(config.variant, level, len(conds)):
            protocols.append(BranchProtocol(conds, budgets))
    protocols.sort(key=BranchProtocol.key)
    if config.coupled:
        if n_actions is None:
            raise ValueError("coupled mode needs the number of actions")
        protocols = [BranchProtocol(p.conditions, p.budgets, a)
                     for a in range(n_actions) for p in protocols]
    return protocols


def describe(protocol: BranchProtocol, observations: Sequence[str] | None = None) -> str:
    def name(o):
        return observations[o] if observations is not None else str(o)
    parts = ["{" + ",".join(name(o) for o in c.members) + f"}}:{b}"
             for c, b in zip(protocol.conditions, protocol.budgets)]
    head = "branch" if protocol.coupled_action is None else f"do {protocol.coupled_action} then branch"
    return f"{head} " + " ".join(parts)
