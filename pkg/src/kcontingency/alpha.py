"""Piecewise-linear convex value functions as sets of alpha-vectors.

A :class:`VectorSet` holds the coefficients as one ``(m, |S|)`` array plus a
parallel tuple of provenance tags. Every set that comes out of :func:`prune`
is in canonical order: lexicographic over coefficients, then by tag.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping, NamedTuple, Sequence

import numpy as np

from . import simplex
from .model import PROB_TOL, PomdpModel
from .protocols import BranchProtocol

EPSILON = 1e-9
_TIE = 1e-12
_PREFILTER_CHUNK = 256


class Provenance(NamedTuple):
    """Where a vector came from.

    ``kind`` is ``"zero"`` (terminal stage), ``"action"`` (ordinary backup),
    ``"branch"`` (instantaneous observe-and-branch) or ``"coupled"`` (execute
    ``action`` then branch). ``sources`` holds the index of the vector picked
    in each referenced stage: one entry for ordinary backups, one per branch
    condition otherwise.
    """

    kind: str
    action: int = -1
    protocol: int = -1
    sources: tuple = ()

    @property
    def is_branch(self) -> bool:
        return self.kind in ("branch", "coupled")


_KIND_RANK = {"zero": 0, "action": 1, "coupled": 2, "branch": 3}


def _tag_key(tag):
    if isinstance(tag, Provenance):
        return (_KIND_RANK[tag.kind], tag.action, tag.protocol, tag.sources)
    return tag


@dataclass(frozen=True)
class AlphaVector:
    coeffs: np.ndarray
    provenance: object


class VectorSet:
    """Immutable parallel arrays of coefficients and provenance tags."""

    __slots__ = ("coeffs", "tags")

    def __init__(self, coeffs, tags: Sequence):
        coeffs = np.array(coeffs, dtype=float, ndmin=2)
        if coeffs.shape[0] != len(tags):
            raise ValueError("coefficient rows and tags differ in length")
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("alpha-vector coefficients must be finite")
        coeffs.setflags(write=False)
        self.coeffs = coeffs
        self.tags = tuple(tags)

    @classmethod
    def from_vectors(cls, vectors: Sequence[AlphaVector]) -> "VectorSet":
        return cls(np.array([v.coeffs for v in vectors]), [v.provenance for v in vectors])

    def __len__(self) -> int:
        return len(self.tags)

    def __iter__(self) -> Iterator[AlphaVector]:
        for row, tag in zip(self.coeffs, self.tags):
            yield AlphaVector(row, tag)

    def __getitem__(self, i) -> AlphaVector:
        return AlphaVector(self.coeffs[i], self.tags[i])

    @property
    def n_states(self) -> int:
        return self.coeffs.shape[1]

    def take(self, idx) -> "VectorSet":
        idx = np.asarray(idx, dtype=int)
        return VectorSet(self.coeffs[idx], [self.tags[i] for i in idx])

    def union(self, *others: "VectorSet") -> "VectorSet":
        sets = (self,) + others
        return VectorSet(np.vstack([s.coeffs for s in sets]),
                         [t for s in sets for t in s.tags])

    def __repr__(self):
        return f"VectorSet(m={len(self)}, n={self.coeffs.shape[1]})"


@dataclass(frozen=True)
class StageValueFunction:
    """Value function with ``level`` branch points left at ``time``."""

    level: int
    time: int
    vectors: VectorSet

    def __post_init__(self):
        assert len(self.vectors) > 0, "a stage value function can never be empty"

    def __len__(self):
        return len(self.vectors)

    @property
    def coeffs(self) -> np.ndarray:
        return self.vectors.coeffs

    @property
    def tags(self) -> tuple:
        return self.vectors.tags


def zero_stage(level: int, time: int, n_states: int) -> StageValueFunction:
    return StageValueFunction(level, time, VectorSet(np.zeros((1, n_states)), [Provenance("zero")]))


def _coeffs(stage) -> np.ndarray:
    if isinstance(stage, StageValueFunction):
        return stage.vectors.coeffs
    if isinstance(stage, VectorSet):
        return stage.coeffs
    return np.array(stage, dtype=float, ndmin=2)


def evaluate(stage, x) -> float:
    """``max_alpha alpha . x``."""
    return float(np.max(_coeffs(stage) @ np.asarray(x, dtype=float)))


def evaluate_many(stage, beliefs: np.ndarray) -> np.ndarray:
    return np.max(np.asarray(beliefs, dtype=float) @ _coeffs(stage).T, axis=1)


def best_vector(stage, x) -> tuple[int, float]:
    """Argmax at ``x``; ties go to the lowest index of the canonical order."""
    vals = _coeffs(stage) @ np.asarray(x, dtype=float)
    i = int(np.argmax(vals))
    return i, float(vals[i])


# -- backups ----------------------------------------------------------------

def backup_ordinary(next_stage, model: PomdpModel, a: int, gamma: float | None = None) -> VectorSet:
    """One vector per vector of ``next_stage``:
    ``alpha'(s) = R(s, a) + gamma * sum_s' T[a, s, s'] alpha(s')``."""
    gamma = model.discount if gamma is None else gamma
    nxt = _coeffs(next_stage)
    out = model.reward[:, a][None, :] + gamma * nxt @ model.transition[a].T
    return VectorSet(out, [Provenance("action", a, -1, (j,)) for j in range(len(nxt))])


def cross_sum(A: VectorSet, B: VectorSet) -> VectorSet:
    """``{a + b}`` with concatenated provenance."""
    if A.coeffs.shape[1] != B.coeffs.shape[1]:
        raise ValueError("cross-sum of vectors with different lengths")
    coeffs = (A.coeffs[:, None, :] + B.coeffs[None, :, :]).reshape(-1, A.coeffs.shape[1])
    tags = [_concat(ta, tb) for ta in A.tags for tb in B.tags]
    return VectorSet(coeffs, tags)


def _concat(ta, tb) -> tuple:
    ta = ta if isinstance(ta, tuple) and not isinstance(ta, Provenance) else (ta,)
    tb = tb if isinstance(tb, tuple) and not isinstance(tb, Provenance) else (tb,)
    return ta + tb


def condition_weights(model: PomdpModel, protocol: BranchProtocol) -> np.ndarray:
    """Row c gives ``Pr(condition c | s)`` (non-coupled) or
    ``Pr(condition c | s', a)`` for the coupled action."""
    if protocol.coupled_action is None:
        O = model.state_observation
    else:
        O = model.observation_fn[protocol.coupled_action]
    return np.array([O[:, list(c.members)].sum(axis=1) for c in protocol.conditions])


def condition_set(stage, weights: np.ndarray, model: PomdpModel | None = None,
                  action: int | None = None, gamma: float = 1.0) -> VectorSet:
    """Vectors ``g(s) = w(s) alpha(s)`` for every alpha of ``stage``, pruned.

    With ``action`` set, the branch follows the action:
    ``g(s) = gamma * sum_s' T[a, s, s'] w(s') alpha(s')``.
    Tags are 1-tuples holding the source index in ``stage``.
    """
    g = _coeffs(stage) * weights[None, :]
    if action is not None:
        g = gamma * g @ model.transition[action].T
    vs = VectorSet(g, [(j,) for j in range(len(g))])
    return vs.take(prune_indices(vs))


def backup_branch(levels: Mapping[int, StageValueFunction], model: PomdpModel,
                  protocol: BranchProtocol, protocol_index: int = 0,
                  gamma: float | None = None) -> VectorSet:
    """Alpha-vectors of one observe-and-branch protocol.

    ``levels[l]`` must be the stage with ``l`` branch points left at the time
    the branch lands: the same time for an instantaneous branch, the next
    time step for a coupled one. Cross-sums are pruned incrementally.
    """
    gamma = model.discount if gamma is None else gamma
    weights = condition_weights(model, protocol)
    a = protocol.coupled_action
    acc = None
    for w, budget in zip(weights, protocol.budgets):
        assert budget in levels, f"missing stage for budget {budget}"
        g = condition_set(levels[budget], w, model, a, gamma)
        acc = g if acc is None else _pruned(cross_sum(acc, g))
    return finish_branch(acc, model, protocol, protocol_index)


def finish_branch(acc: VectorSet, model: PomdpModel, protocol: BranchProtocol,
                  protocol_index: int) -> VectorSet:
    coeffs = acc.coeffs
    if protocol.coupled_action is None:
        tags = [Provenance("branch", -1, protocol_index, t) for t in acc.tags]
    else:
        a = protocol.coupled_action
        coeffs = coeffs + model.reward[:, a][None, :]
        tags = [Provenance("coupled", a, protocol_index, t) for t in acc.tags]
    return VectorSet(coeffs, tags)


def _pruned(vs: VectorSet) -> VectorSet:
    return vs.take(prune_indices(vs))


# -- dominance LP and pruning -----------------------------------------------

def _witness_lp(diff: np.ndarray, eps: float) -> np.ndarray | None:
    """Belief x with ``diff @ x >= eps`` componentwise, or None.

    Solves ``max d  s.t.  d <= diff_i . x,  sum x <= 1,  x, d >= 0``. If the
    optimum is positive the simplex constraint is tight, so the relaxation
    answers the same question as the exact simplex-constrained LP.
    """
    m, n = diff.shape
    varying = np.any(diff != 0.0, axis=0)
    if not varying.any():
        return None
    # all diff equal to zero on a column: that state cannot help, drop it
    D = diff[:, varying]
    nv = D.shape[1]
    # corner check: some state where the candidate already wins by eps
    corner = np.flatnonzero(np.all(D >= eps, axis=0))
    if corner.size:
        xr = np.zeros(nv)
        xr[corner[0]] = 1.0
    else:
        if np.any(np.all(D <= 0.0, axis=1)):
            return None
        A = np.zeros((m + 1, nv + 1))
        A[:m, :nv] = -D
        A[:m, nv] = 1.0
        A[m, :nv] = 1.0
        b = np.zeros(m + 1)
        b[m] = 1.0
        c = np.zeros(nv + 1)
        c[nv] = 1.0
        res = simplex.maximize(c, A, b)
        if res.objective < eps:
            return None
        xr = res.z[:nv]
        total = xr.sum()
        if total <= 0.0:
            return None
        xr = xr / total
    x = np.zeros(n)
    x[varying] = xr
    if np.min(diff @ x) < eps - _TIE:
        return None
    return x


def lp_dominance(candidate, against, eps: float = EPSILON) -> np.ndarray | None:
    """A belief where ``candidate`` beats every vector of ``against`` by at
    least ``eps``, or None when there is no such belief."""
    cand = np.asarray(getattr(candidate, "coeffs", candidate), dtype=float)
    W = _coeffs(against)
    if W.shape[0] == 0:
        raise ValueError("against must be nonempty")
    return _witness_lp(cand[None, :] - W, eps)


def canonical_order(coeffs: np.ndarray, tags: Sequence | None = None) -> np.ndarray:
    m = coeffs.shape[0]
    if tags is None:
        rank = np.arange(m)
    else:
        keyed = sorted(range(m), key=lambda i: _tag_key(tags[i]))
        rank = np.empty(m, dtype=int)
        rank[keyed] = np.arange(m)
    keys = [rank] + [coeffs[:, j] for j in range(coeffs.shape[1] - 1, -1, -1)]
    return np.lexsort(keys)


def _pointwise_survivors(V: np.ndarray) -> np.ndarray:
    """Mask of rows not weakly dominated by another (distinct) row."""
    m = V.shape[0]
    keep = np.ones(m, dtype=bool)
    for start in range(0, m, _PREFILTER_CHUNK):
        block = V[start:start + _PREFILTER_CHUNK]
        # ge[i, j]: row j >= block row i everywhere
        ge = np.all(V[None, :, :] >= block[:, None, :], axis=2)
        idx = np.arange(start, start + block.shape[0])
        ge[np.arange(block.shape[0]), idx] = False
        keep[idx] = ~ge.any(axis=1)
    return keep


def prune_indices(vs: VectorSet | np.ndarray, eps: float = EPSILON) -> np.ndarray:
    """Indices (into ``vs``, in canonical order) of a minimal subset with the
    same upper surface over the belief simplex, up to ``eps``."""
    if isinstance(vs, VectorSet):
        coeffs, tags = vs.coeffs, vs.tags
    else:
        coeffs, tags = np.asarray(vs, dtype=float), None
    m = coeffs.shape[0]
    if m <= 1:
        return np.arange(m)
    order = canonical_order(coeffs, tags)
    V = coeffs[order]

    # exact duplicates: keep the first (smallest tag)
    distinct = np.ones(m, dtype=bool)
    distinct[1:] = np.any(V[1:] != V[:-1], axis=1)
    order, V = order[distinct], V[distinct]
    varying = np.any(V != V[0], axis=0)
    if not varying.any() or V.shape[0] == 1:
        return order[:1]
    V = V[:, varying]

    keep = _pointwise_survivors(V)
    order, V = order[keep], V[keep]
    if V.shape[0] == 1:
        return order

    n = V.shape[1]
    frontier = list(range(V.shape[0]))
    kept: list[int] = []
    # seed with the lexicographically largest winner at each corner
    for s in range(n):
        col = V[frontier, s]
        tied = np.flatnonzero(col == col.max())
        j = frontier[tied[-1]]
        if j not in kept:
            kept.append(j)
    frontier = [i for i in frontier if i not in kept]

    while frontier:
        phi = frontier[0]
        x = _witness_lp(V[phi][None, :] - V[kept], eps)
        if x is None:
            frontier.pop(0)
            continue
        vals = V[frontier] @ x
        tied = np.flatnonzero(vals >= vals.max() - _TIE)
        best = frontier[tied[-1]]
        kept.append(best)
        frontier.remove(best)

    # final pass: every survivor must keep an eps-witness against the others
    kept.sort()
    final = list(kept)
    for i in kept:
        others = [j for j in final if j != i]
        if others and _witness_lp(V[i][None, :] - V[others], eps) is None:
            final.remove(i)
    return order[np.array(final, dtype=int)]


def prune(vs, eps: float = EPSILON):
    """Pruned copy of a :class:`VectorSet` or coefficient array."""
    idx = prune_indices(vs, eps)
    if isinstance(vs, VectorSet):
        return vs.take(idx)
    return np.asarray(vs, dtype=float)[idx]
