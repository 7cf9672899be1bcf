"""Level-by-level value iteration over the branch-budget stack.

Level 0 is plain conformant value iteration. Level ``l`` adds the
observe-and-branch protocols, whose backups read the already solved lower
levels (at the same time step for instantaneous branching, at the next time
step in coupled mode).
"""

from __future__ import annotations

import logging
import time as _time
from dataclasses import dataclass, field

import numpy as np

from . import alpha
from .alpha import StageValueFunction, VectorSet, zero_stage
from .model import ModelError, PomdpModel, as_belief
from .protocols import BRANCH_MODES, VARIANTS, BranchProtocol, enumerate_branch_protocols

log = logging.getLogger(__name__)


class ConfigError(ModelError):
    pass


@dataclass(frozen=True)
class SolveConfig:
    horizon: int
    k: int
    variant: str = "balanced"
    branch_mode: str = "full"
    coupled: bool = False
    discount: float | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if self.branch_mode not in BRANCH_MODES:
            raise ConfigError(f"unknown branch mode {self.branch_mode!r}; choose from {BRANCH_MODES}")
        if self.horizon < 0 or self.k < 0:
            raise ConfigError("horizon and k must be nonnegative")
        if self.discount is not None and not 0.0 <= self.discount <= 1.0:
            raise ConfigError(f"discount {self.discount} outside [0, 1]")

    def gamma(self, model: PomdpModel) -> float:
        return model.discount if self.discount is None else float(self.discount)

    def validate_for(self, model: PomdpModel) -> None:
        if not self.coupled and self.k > 0 and not model.action_independent_observations:
            raise ConfigError(
                "observation probabilities depend on the last action, so an "
                "instantaneous observe-and-branch action is ill-defined; "
                "solve with coupled=True (--coupled)")


@dataclass
class SolvedPolicy:
    model: PomdpModel
    config: SolveConfig
    gamma: float
    stages: list[list[StageValueFunction]]
    protocols: list[list[BranchProtocol]]
    candidates: list[list[VectorSet | None]] | None = None
    seconds: float = 0.0
    stats: dict = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return self.config.horizon

    @property
    def k(self) -> int:
        return self.config.k

    def stage(self, level: int, time: int) -> StageValueFunction:
        return self.stages[level][time]

    @property
    def total_vectors(self) -> int:
        return sum(len(s) for row in self.stages for s in row)


def value_at(policy: SolvedPolicy, x=None, level: int | None = None, time: int = 0) -> float:
    """Optimal value with ``level`` branch points left and ``H - time`` steps to go."""
    level = policy.k if level is None else level
    if not (0 <= level <= policy.k and 0 <= time <= policy.horizon):
        raise IndexError(f"(level={level}, time={time}) outside the solved table")
    x = policy.model.start if x is None else as_belief(x, policy.model.n_states)
    return alpha.evaluate(policy.stages[level][time], x)


class _BranchCache:
    """Shares condition sets and skips protocols whose pieces coincide."""

    def __init__(self, model: PomdpModel, gamma: float):
        self.model = model
        self.gamma = gamma
        self.sets: dict = {}
        self.content_ids: dict[bytes, int] = {}

    def condition_set(self, stage: StageValueFunction, members, weights, action):
        key = (stage.level, stage.time, members, action)
        hit = self.sets.get(key)
        if hit is None:
            # many conditions mask the stage identically; prune each content once
            raw = (stage.level, stage.time, action, weights.tobytes())
            hit = self.sets.get(raw)
            if hit is None:
                vs = alpha.condition_set(stage, weights, self.model, action, self.gamma)
                content = vs.coeffs.tobytes() + str(vs.coeffs.shape).encode()
                cid = self.content_ids.setdefault(content, len(self.content_ids))
                hit = self.sets[raw] = (vs, cid)
            self.sets[key] = hit
        return hit


def _branch_vectors(cache: _BranchCache, levels, protocol: BranchProtocol, index: int,
                    seen: set) -> VectorSet | None:
    model = cache.model
    weights = alpha.condition_weights(model, protocol)
    pieces = [cache.condition_set(levels[b], c.members, w, protocol.coupled_action)
              for c, b, w in zip(protocol.conditions, protocol.budgets, weights)]
    signature = (protocol.coupled_action, tuple(sorted(cid for _, cid in pieces)))
    if signature in seen:
        return None
    seen.add(signature)
    acc = None
    for vs, _ in pieces:
        acc = vs if acc is None else alpha._pruned(alpha.cross_sum(acc, vs))
    return alpha.finish_branch(acc, model, protocol, index)


def solve(model: PomdpModel, config: SolveConfig, keep_candidates: bool = False) -> SolvedPolicy:
    """Solve levels ``0..k`` for every time step ``0..H``.

    With ``keep_candidates`` the unpruned union of backups feeding each stage
    is retained (for diagnostics and property checks).
    """
    config.validate_for(model)
    gamma = config.gamma(model)
    H, K, nS = config.horizon, config.k, model.n_states
    start = _time.perf_counter()

    stages: list[list[StageValueFunction]] = []
    candidates = [] if keep_candidates else None
    protocols = []
    cache = _BranchCache(model, gamma)
    n_skipped = 0
    for level in range(K + 1):
        level_protocols = enumerate_branch_protocols(config, level, model.n_observations,
                                                     model.n_actions)
        protocols.append(level_protocols)
        row: list = [None] * (H + 1)
        row[H] = zero_stage(level, H, nS)
        cand_row: list = [None] * (H + 1)
        stages.append(row)
        for t in range(H - 1, -1, -1):
            parts = [alpha.backup_ordinary(row[t + 1], model, a, gamma)
                     for a in range(model.n_actions)]
            if level_protocols:
                lt = t + 1 if config.coupled else t
                levels = {b: stages[b][lt] for b in range(level)}
                seen: set = set()
                for i, p in enumerate(level_protocols):
                    vs = _branch_vectors(cache, levels, p, i, seen)
                    if vs is None:
                        n_skipped += 1
                    else:
                        parts.append(vs)
            union = parts[0].union(*parts[1:])
            pruned = alpha.prune(union)
            row[t] = StageValueFunction(level, t, pruned)
            if keep_candidates:
                cand_row[t] = union
            log.debug("level %d time %d: %d candidates -> %d vectors",
                      level, t, len(union), len(pruned))
        if keep_candidates:
            candidates.append(cand_row)

    seconds = _time.perf_counter() - start
    policy = SolvedPolicy(model, config, gamma, stages, protocols, candidates, seconds)
    policy.stats = {"equivalent_protocols_skipped": n_skipped,
                    "alpha_vectors": policy.total_vectors}
    return policy
