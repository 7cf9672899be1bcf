"""POMDP model representation, `.pomdp` parsing and belief arithmetic.

Arrays are indexed as

* ``transition[a, s, s']``
* ``reward[s, a]``
* ``observation[a, s', o]``

Beliefs are plain 1-D float arrays over states. Every update function
returns a fresh array and never mutates its input.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

PROB_TOL = 1e-12
BELIEF_TOL = 1e-9


class ModelError(ValueError):
    """Base class for invalid model input."""


class ParseError(ModelError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class StochasticityError(ModelError):
    pass


class UnknownNameError(ModelError):
    pass


class MissingSectionError(ModelError):
    pass


class ImpossibleObservation(ArithmeticError):
    """Raised when a branch condition has (numerically) zero likelihood."""

    def __init__(self, likelihood: float):
        super().__init__(f"observation likelihood {likelihood:.3g} is below {PROB_TOL:g}")
        self.likelihood = likelihood


def _check_names(kind: str, names: Sequence[str]) -> tuple[str, ...]:
    names = tuple(str(n) for n in names)
    if not names:
        raise ModelError(f"{kind} list is empty")
    if len(set(names)) != len(names):
        dup = sorted({n for n in names if names.count(n) > 1})
        raise ModelError(f"duplicate {kind} names: {', '.join(dup)}")
    return names


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PomdpModel:
    states: tuple[str, ...]
    actions: tuple[str, ...]
    observations: tuple[str, ...]
    transition: np.ndarray
    reward: np.ndarray
    observation_fn: np.ndarray
    discount: float = 1.0
    start: np.ndarray | None = None
    action_independent_observations: bool = field(init=False)

    def __post_init__(self):
        states = _check_names("state", self.states)
        actions = _check_names("action", self.actions)
        observations = _check_names("observation", self.observations)
        nS, nA, nO = len(states), len(actions), len(observations)
        T = _frozen(self.transition)
        R = _frozen(self.reward)
        O = _frozen(self.observation_fn)
        if T.shape != (nA, nS, nS):
            raise ModelError(f"transition has shape {T.shape}, expected {(nA, nS, nS)}")
        if R.shape != (nS, nA):
            raise ModelError(f"reward has shape {R.shape}, expected {(nS, nA)}")
        if O.shape != (nA, nS, nO):
            raise ModelError(f"observation_fn has shape {O.shape}, expected {(nA, nS, nO)}")
        if not np.all(np.isfinite(R)):
            raise ModelError("reward contains non-finite entries")
        if not 0.0 <= self.discount <= 1.0:
            raise ModelError(f"discount {self.discount} outside [0, 1]")

        for name, arr in (("transition", T), ("observation", O)):
            if np.any(arr < -PROB_TOL) or np.any(arr > 1 + PROB_TOL) or not np.all(np.isfinite(arr)):
                raise StochasticityError(f"{name} probabilities must lie in [0, 1]")
        rows = T.sum(axis=2)
        bad = np.argwhere(np.abs(rows - 1.0) > PROB_TOL)
        if bad.size:
            a, s = bad[0]
            raise StochasticityError(
                f"T[{actions[a]}][{states[s]}] sums to {rows[a, s]:.12g}, not 1")
        rows = O.sum(axis=2)
        bad = np.argwhere(np.abs(rows - 1.0) > PROB_TOL)
        if bad.size:
            a, s = bad[0]
            raise StochasticityError(
                f"O[{actions[a]}][{states[s]}] sums to {rows[a, s]:.12g}, not 1")

        if self.start is None:
            start = np.full(nS, 1.0 / nS)
        else:
            start = as_belief(self.start, nS)

        object.__setattr__(self, "states", states)
        object.__setattr__(self, "actions", actions)
        object.__setattr__(self, "observations", observations)
        object.__setattr__(self, "transition", T)
        object.__setattr__(self, "reward", R)
        object.__setattr__(self, "observation_fn", O)
        object.__setattr__(self, "discount", float(self.discount))
        object.__setattr__(self, "start", _frozen(start))
        object.__setattr__(self, "action_independent_observations",
                           bool(np.all(O == O[0])))

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    @property
    def n_observations(self) -> int:
        return len(self.observations)

    @property
    def state_observation(self) -> np.ndarray:
        """The action-free observation matrix ``O[s, o]``."""
        if not self.action_independent_observations:
            raise ModelError("observation probabilities depend on the action; "
                             "use coupled mode")
        return self.observation_fn[0]

    def action_index(self, name: str | int) -> int:
        return _index(self.actions, name, "action")

    def state_index(self, name: str | int) -> int:
        return _index(self.states, name, "state")

    def observation_index(self, name: str | int) -> int:
        return _index(self.observations, name, "observation")

    def with_discount(self, discount: float) -> "PomdpModel":
        return PomdpModel(self.states, self.actions, self.observations, self.transition,
                          self.reward, self.observation_fn, discount, self.start)

    def with_start(self, start) -> "PomdpModel":
        return PomdpModel(self.states, self.actions, self.observations, self.transition,
                          self.reward, self.observation_fn, self.discount, start)


def _index(names: Sequence[str], name, kind: str) -> int:
    if isinstance(name, (int, np.integer)):
        if not 0 <= name < len(names):
            raise UnknownNameError(f"{kind} index {name} out of range")
        return int(name)
    try:
        return names.index(name)
    except ValueError:
        raise UnknownNameError(f"unknown {kind} {name!r}") from None


def as_belief(probs, n_states: int | None = None) -> np.ndarray:
    """Validate and renormalize a probability vector."""
    x = np.array(probs, dtype=float).ravel()
    if n_states is not None and x.shape[0] != n_states:
        raise ModelError(f"belief has {x.shape[0]} entries, expected {n_states}")
    if not np.all(np.isfinite(x)) or np.any(x < -PROB_TOL):
        raise ModelError("belief entries must be finite and nonnegative")
    total = x.sum()
    if abs(total - 1.0) > BELIEF_TOL:
        raise ModelError(f"belief sums to {total:.12g}, not 1")
    return _clean(x)


def _clean(x: np.ndarray) -> np.ndarray:
    x = np.where(x < PROB_TOL, 0.0, x)
    return x / x.sum()


def point_belief(n_states: int, s: int) -> np.ndarray:
    x = np.zeros(n_states)
    x[s] = 1.0
    return x


# -- belief updates ---------------------------------------------------------

def transition_update(model: PomdpModel, x: np.ndarray, a: int) -> np.ndarray:
    """Prediction through ``T`` only (the uninformative observation)."""
    return _clean(np.asarray(x, dtype=float) @ model.transition[a])


def _condition_update(x: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, float]:
    joint = x * weights
    z = float(joint.sum())
    if z < PROB_TOL:
        raise ImpossibleObservation(z)
    return _clean(joint / z), z


def _members(observations) -> list[int]:
    if isinstance(observations, (int, np.integer)):
        return [int(observations)]
    members = sorted(set(int(o) for o in observations))
    if not members:
        raise ModelError("observation subset is empty")
    return members


def observation_update(model: PomdpModel, x: np.ndarray, o: int) -> tuple[np.ndarray, float]:
    """Posterior after observing ``o`` with no transition; returns (belief, Pr(o|x))."""
    return _condition_update(np.asarray(x, dtype=float), model.state_observation[:, o])


def subset_observation_update(model: PomdpModel, x: np.ndarray,
                              subset: Iterable[int]) -> tuple[np.ndarray, float]:
    """Posterior after learning that the observation lies in ``subset``."""
    weights = model.state_observation[:, _members(subset)].sum(axis=1)
    return _condition_update(np.asarray(x, dtype=float), weights)


def action_observation_update(model: PomdpModel, x: np.ndarray, a: int,
                              o) -> tuple[np.ndarray, float]:
    """Execute ``a`` then observe ``o`` (an index or a subset of indices)."""
    predicted = np.asarray(x, dtype=float) @ model.transition[a]
    weights = model.observation_fn[a][:, _members(o)].sum(axis=1)
    return _condition_update(predicted, weights)


# -- .pomdp parsing ---------------------------------------------------------

_TOKEN_RE = re.compile(r"""
    (?P<comment>\#[^\n]*)
  | (?P<newline>\n)
  | (?P<space>[ \t\r\f\v]+)
  | (?P<colon>:)
  | (?P<number>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)
  | (?P<star>\*)
  | (?P<name>[A-Za-z_][A-Za-z0-9_\-.]*)
""", re.VERBOSE)

_SECTIONS = ("discount", "values", "states", "actions", "observations", "start", "T", "O", "R")


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "newline":
            line += 1
            line_start = m.end()
        elif kind not in ("space", "comment"):
            toks.append(_Tok(kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0
        self.header: dict[str, object] = {}
        self.entries: list[tuple[str, list, _Tok]] = []

    def peek(self, offset=0) -> _Tok | None:
        j = self.i + offset
        return self.toks[j] if j < len(self.toks) else None

    def next(self) -> _Tok:
        tok = self.peek()
        if tok is None:
            last = self.toks[-1] if self.toks else _Tok("", "", 1, 1)
            raise ParseError("unexpected end of input", last.line, last.col + len(last.text))
        self.i += 1
        return tok

    def expect(self, kind: str) -> _Tok:
        tok = self.next()
        if tok.kind != kind:
            raise ParseError(f"expected {kind}, got {tok.text!r}", tok.line, tok.col)
        return tok

    def at_section(self) -> bool:
        tok, nxt = self.peek(), self.peek(1)
        return (tok is not None and tok.kind == "name" and tok.text in _SECTIONS
                and nxt is not None and nxt.kind == "colon")

    def values_until_section(self) -> list[_Tok]:
        out = []
        while self.peek() is not None and not self.at_section():
            out.append(self.next())
        return out

    def parse(self):
        while self.peek() is not None:
            tok = self.next()
            if tok.kind != "name" or tok.text not in _SECTIONS:
                raise ParseError(f"expected a section keyword, got {tok.text!r}", tok.line, tok.col)
            self.expect("colon")
            key = tok.text
            if key in ("T", "O", "R"):
                self.entries.append((key, self.entry_body(), tok))
            else:
                if key in self.header:
                    raise ParseError(f"duplicate {key!r} section", tok.line, tok.col)
                self.header[key] = (self.values_until_section(), tok)
        return self

    def entry_body(self) -> list[list[_Tok]]:
        """Split ``a : s : s' v...`` into colon separated groups."""
        groups: list[list[_Tok]] = [[]]
        while self.peek() is not None and not self.at_section():
            tok = self.next()
            if tok.kind == "colon":
                groups.append([])
            else:
                groups[-1].append(tok)
        return groups


def _float(tok: _Tok) -> float:
    if tok.kind != "number":
        raise ParseError(f"expected a number, got {tok.text!r}", tok.line, tok.col)
    return float(tok.text)


def _names_from(toks: list[_Tok], kind: str, sect: _Tok) -> list[str]:
    if not toks:
        raise ParseError(f"empty {kind} section", sect.line, sect.col)
    if len(toks) == 1 and toks[0].kind == "number":
        n = toks[0].text
        if not n.isdigit() or int(n) <= 0:
            raise ParseError(f"bad {kind} count {n!r}", toks[0].line, toks[0].col)
        return [str(i) for i in range(int(n))]
    for t in toks:
        if t.kind != "name":
            raise ParseError(f"bad {kind} name {t.text!r}", t.line, t.col)
    return [t.text for t in toks]


def _resolve(tok: _Tok, names: list[str], kind: str) -> list[int]:
    if tok.kind == "star":
        return list(range(len(names)))
    if tok.kind == "number" and tok.text.isdigit():
        i = int(tok.text)
        if i >= len(names):
            raise UnknownNameError(f"line {tok.line}, column {tok.col}: {kind} index {i} out of range")
        return [i]
    if tok.kind == "name" and tok.text in names:
        return [names.index(tok.text)]
    raise UnknownNameError(f"line {tok.line}, column {tok.col}: unknown {kind} {tok.text!r}")


def _numbers(toks: list[_Tok], count: int, where: _Tok) -> np.ndarray:
    if len(toks) != count:
        raise ParseError(f"expected {count} numbers, got {len(toks)}", where.line, where.col)
    return np.array([_float(t) for t in toks])


def _parse_prob_entry(table: np.ndarray, groups, head: _Tok, names, kinds):
    acts_tok = groups[0]
    if not acts_tok:
        raise ParseError("missing action", head.line, head.col)
    acts = _resolve(acts_tok[0], names[0], kinds[0])
    n_rows, n_cols = table.shape[1], table.shape[2]
    if len(groups) == 1:
        body = acts_tok[1:]
        if len(body) == 1 and body[0].kind == "name" and body[0].text in ("identity", "uniform"):
            if body[0].text == "identity":
                if n_rows != n_cols:
                    raise ParseError("identity needs a square matrix", body[0].line, body[0].col)
                mat = np.eye(n_rows)
            else:
                mat = np.full((n_rows, n_cols), 1.0 / n_cols)
        else:
            mat = _numbers(body, n_rows * n_cols, head).reshape(n_rows, n_cols)
        for a in acts:
            table[a] = mat
        return
    if len(acts_tok) != 1:
        raise ParseError("unexpected tokens after action", acts_tok[1].line, acts_tok[1].col)
    row_toks = groups[1]
    if not row_toks:
        raise ParseError("missing start state", head.line, head.col)
    rows = _resolve(row_toks[0], names[1], kinds[1])
    if len(groups) == 2:
        body = row_toks[1:]
        if len(body) == 1 and body[0].kind == "name" and body[0].text == "uniform":
            vec = np.full(n_cols, 1.0 / n_cols)
        else:
            vec = _numbers(body, n_cols, head)
        for a in acts:
            for r in rows:
                table[a, r] = vec
        return
    if len(groups) != 3 or len(row_toks) != 1:
        raise ParseError("malformed entry", head.line, head.col)
    col_toks = groups[2]
    if len(col_toks) != 2:
        raise ParseError("expected '<name> <probability>'", head.line, head.col)
    cols = _resolve(col_toks[0], names[2], kinds[2])
    p = _float(col_toks[1])
    for a in acts:
        for r in rows:
            table[a, r, cols] = p


def parse_model(text: str) -> PomdpModel:
    """Parse the supported subset of Cassandra's ``.pomdp`` format.

    Rewards of the form ``R: a : s : s' : o v`` are folded to ``R(s, a)`` by
    taking the expectation over ``T`` and ``O``.
    """
    p = _Parser(text).parse()
    for key in ("discount", "states", "actions", "observations"):
        if key not in p.header:
            raise MissingSectionError(f"missing mandatory section {key!r}")

    toks, sect = p.header["discount"]
    if len(toks) != 1:
        raise ParseError("discount takes one number", sect.line, sect.col)
    discount = _float(toks[0])

    sign = 1.0
    if "values" in p.header:
        toks, sect = p.header["values"]
        if len(toks) != 1 or toks[0].text not in ("reward", "cost"):
            raise ParseError("values must be 'reward' or 'cost'", sect.line, sect.col)
        sign = 1.0 if toks[0].text == "reward" else -1.0

    states = _names_from(p.header["states"][0], "state", p.header["states"][1])
    actions = _names_from(p.header["actions"][0], "action", p.header["actions"][1])
    observations = _names_from(p.header["observations"][0], "observation",
                               p.header["observations"][1])
    nS, nA, nO = len(states), len(actions), len(observations)

    start = None
    if "start" in p.header:
        toks, sect = p.header["start"]
        if len(toks) == 1 and toks[0].text == "uniform":
            start = np.full(nS, 1.0 / nS)
        elif len(toks) == 1 and toks[0].kind == "name":
            start = point_belief(nS, _resolve(toks[0], states, "state")[0])
        else:
            start = _numbers(toks, nS, sect)

    T = np.zeros((nA, nS, nS))
    O = np.zeros((nA, nS, nO))
    R4 = np.zeros((nA, nS, nS, nO))
    for key, groups, head in p.entries:
        if key == "T":
            _parse_prob_entry(T, groups, head, [actions, states, states],
                              ["action", "state", "state"])
        elif key == "O":
            _parse_prob_entry(O, groups, head, [actions, states, observations],
                              ["action", "state", "observation"])
        else:
            _parse_reward_entry(R4, groups, head, actions, states, observations)

    # fold R(a, s, s', o) into R(s, a) = sum_{s', o} T O R
    reward = sign * np.einsum("ast,ato,asto->sa", T, O, R4)
    return PomdpModel(states, actions, observations, T, reward, O, discount, start)


def _parse_reward_entry(R4, groups, head, actions, states, observations):
    # R: a : s : s' : o v   |   R: a : s : s' <row over o>   |   R: a : s <matrix s' x o>
    names = [actions, states, states, observations]
    kinds = ["action", "state", "state", "observation"]
    if len(groups) < 2:
        raise ParseError("reward entry needs at least action and start state", head.line, head.col)
    idx = []
    for g, (nm, kd) in zip(groups[:-1], zip(names, kinds)):
        if len(g) != 1:
            raise ParseError("malformed reward entry", head.line, head.col)
        idx.append(_resolve(g[0], nm, kd))
    last = groups[-1]
    depth = len(groups)
    if depth > 4:
        raise ParseError("too many fields in reward entry", head.line, head.col)
    if not last:
        raise ParseError("missing reward value", head.line, head.col)
    field_names, field_kinds = names[depth - 1], kinds[depth - 1]
    sel = _resolve(last[0], field_names, field_kinds)
    body = last[1:]
    nS, nO = R4.shape[2], R4.shape[3]
    if depth == 4:
        val = _numbers(body, 1, head)[0]
        for a in idx[0]:
            for s in idx[1]:
                for t in idx[2]:
                    R4[a, s, t, sel] = val
    elif depth == 3:
        vec = _numbers(body, nO, head)
        for a in idx[0]:
            for s in idx[1]:
                for t in sel:
                    R4[a, s, t] = vec
    else:
        mat = _numbers(body, nS * nO, head).reshape(nS, nO)
        for a in idx[0]:
            for s in sel:
                R4[a, s] = mat


def load_model(path) -> PomdpModel:
    with open(path) as f:
        return parse_model(f.read())


def format_model(model: PomdpModel) -> str:
    """Write a model back out in the same format (rewards as ``R: a : s : * : *``)."""
    fmt = "{:.17g}".format
    lines = [
        f"discount: {fmt(model.discount)}",
        "values: reward",
        "states: " + " ".join(model.states),
        "actions: " + " ".join(model.actions),
        "observations: " + " ".join(model.observations),
        "start: " + " ".join(fmt(v) for v in model.start),
        "",
    ]
    for a, an in enumerate(model.actions):
        lines.append(f"T: {an}")
        lines.extend(" ".join(fmt(v) for v in row) for row in model.transition[a])
        lines.append("")
    for a, an in enumerate(model.actions):
        lines.append(f"O: {an}")
        lines.extend(" ".join(fmt(v) for v in row) for row in model.observation_fn[a])
        lines.append("")
    for a, an in enumerate(model.actions):
        for s, sn in enumerate(model.states):
            r = model.reward[s, a]
            if r != 0.0:
                lines.append(f"R: {an} : {sn} : * : * {fmt(r)}")
    return "\n".join(lines) + "\n"
