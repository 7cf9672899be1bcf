import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kcontingency.model import (ImpossibleObservation, MissingSectionError, ModelError, ParseError,
                                PomdpModel, StochasticityError, UnknownNameError,
                                action_observation_update, as_belief, format_model, parse_model,
                                observation_update, subset_observation_update, transition_update)
from kcontingency import problems

from conftest import beliefs

TIGER_TEXT = """
# classic tiger, listening accuracy 0.85
discount: 1.0
values: reward
states: tiger-left tiger-right
actions: listen open-left open-right
observations: hear-left hear-right
start: uniform

T: listen identity
T: open-left uniform
T: open-right uniform

O: listen
0.85 0.15
0.15 0.85
O: open-left uniform
O: open-right uniform

R: listen : * : * : * -1
R: open-left : tiger-left : * : * -10
R: open-left : tiger-right : * : * 6
R: open-right : tiger-left : * : * 6
R: open-right : tiger-right : * : * -10
"""

# Observation row shared by every action, as the tiger variant here assumes.
TIGER_TEXT_SHARED_O = TIGER_TEXT.replace(
    "O: open-left uniform\nO: open-right uniform",
    "O: open-left\n0.85 0.15\n0.15 0.85\nO: open-right\n0.85 0.15\n0.15 0.85")


def test_parse_tiger_shape():
    m = parse_model(TIGER_TEXT_SHARED_O)
    assert (m.n_states, m.n_actions, m.n_observations) == (2, 3, 2)
    assert m.discount == 1.0
    assert m.action_independent_observations
    np.testing.assert_allclose(m.start, [0.5, 0.5])
    ref = problems.tiger()
    np.testing.assert_allclose(m.transition, ref.transition)
    np.testing.assert_allclose(m.reward, ref.reward)
    np.testing.assert_allclose(m.observation_fn, ref.observation_fn)


def test_parse_flags_action_dependent_observations():
    m = parse_model(TIGER_TEXT)
    assert not m.action_independent_observations
    with pytest.raises(ModelError):
        m.state_observation


def test_identity_keyword():
    m = parse_model(TIGER_TEXT)
    np.testing.assert_array_equal(m.transition[m.action_index("listen")], np.eye(2))


def test_stochasticity_error_names_action_and_state():
    bad = TIGER_TEXT.replace("T: listen identity",
                             "T: listen\n0.9 0.0\n0.0 1.0")
    with pytest.raises(StochasticityError) as err:
        parse_model(bad)
    assert "listen" in str(err.value) and "tiger-left" in str(err.value)


def test_syntax_error_has_position():
    bad = TIGER_TEXT.replace("T: listen identity", "T: listen identity @")
    with pytest.raises(ParseError) as err:
        parse_model(bad)
    assert err.value.line == 10 and err.value.column > 0


def test_unknown_name():
    with pytest.raises(UnknownNameError, match="jump"):
        parse_model(TIGER_TEXT + "\nT: jump identity\n")


def test_missing_section():
    with pytest.raises(MissingSectionError, match="discount"):
        parse_model(TIGER_TEXT.replace("discount: 1.0", ""))


def test_single_entries_and_wildcards():
    text = """
discount: 0.95
values: cost
states: 3
actions: a b
observations: x y
T: * : 0 : 1 1.0
T: * : 1 : 2 1.0
T: * : 2 : 2 1.0
O: * : * : x 0.5
O: * : * : y 0.5
R: a : 0 : * : * 2
R: b : * : 2 : * 1
"""
    m = parse_model(text)
    assert m.states == ("0", "1", "2")
    np.testing.assert_allclose(m.transition[0], [[0, 1, 0], [0, 0, 1], [0, 0, 1]])
    # costs are negated; R(s, b) = expectation over s' of the s'=2 reward
    np.testing.assert_allclose(m.reward[:, 0], [-2, 0, 0])
    np.testing.assert_allclose(m.reward[:, 1], [0, -1, -1])
    assert m.discount == 0.95


def test_reward_folding_over_observations():
    text = TIGER_TEXT_SHARED_O + "\nR: listen : tiger-left : * : hear-left 1\n"
    m = parse_model(text)
    # -1 everywhere, overwritten to +1 when hearing left (prob 0.85) from tiger-left
    assert m.reward[0, 0] == pytest.approx(0.85 * 1 + 0.15 * -1)


def test_format_round_trip(tiger, maze):
    for model in (tiger, maze, parse_model(TIGER_TEXT)):
        back = parse_model(format_model(model))
        assert back.states == model.states and back.observations == model.observations
        np.testing.assert_allclose(back.transition, model.transition)
        np.testing.assert_allclose(back.reward, model.reward)
        np.testing.assert_allclose(back.observation_fn, model.observation_fn)
        np.testing.assert_allclose(back.start, model.start)


def test_model_rejects_bad_probabilities(tiger):
    T = np.array(tiger.transition)
    T[0, 0] = [1.2, -0.2]
    with pytest.raises(ModelError):
        PomdpModel(tiger.states, tiger.actions, tiger.observations, T, tiger.reward,
                   tiger.observation_fn)
    with pytest.raises(ModelError):
        PomdpModel(("a", "a"), tiger.actions, tiger.observations, tiger.transition,
                   tiger.reward, tiger.observation_fn)


def test_model_arrays_are_read_only(tiger):
    with pytest.raises(ValueError):
        tiger.transition[0, 0, 0] = 0.3


def test_as_belief_renormalizes_and_validates():
    np.testing.assert_allclose(as_belief([0.5, 0.5 + 1e-10]), [0.5, 0.5], atol=1e-9)
    with pytest.raises(ModelError):
        as_belief([0.7, 0.7])
    with pytest.raises(ModelError):
        as_belief([1.0, 0.0], 3)


# -- belief updates -----------------------------------------------------------

def test_transition_update_examples(tiger, grid):
    np.testing.assert_allclose(transition_update(tiger, np.array([0.3, 0.7]), 0), [0.3, 0.7])
    np.testing.assert_allclose(transition_update(tiger, np.array([1.0, 0.0]), 1), [0.5, 0.5])
    s = grid.state_index("r5c5")
    x = np.zeros(grid.n_states)
    x[s] = 1
    y = transition_update(grid, x, grid.action_index("N"))
    expect = {"r4c5": 0.9, "r5c4": 0.05, "r5c6": 0.05}
    for name, p in expect.items():
        assert y[grid.state_index(name)] == pytest.approx(p)
    assert y.sum() == pytest.approx(1.0)


def test_observation_update_examples(tiger):
    post, z = observation_update(tiger, np.array([0.5, 0.5]), 0)
    np.testing.assert_allclose(post, [0.85, 0.15])
    assert z == pytest.approx(0.5)
    post, z = observation_update(tiger, np.array([0.85, 0.15]), 1)
    np.testing.assert_allclose(post, [0.5, 0.5])
    assert z == pytest.approx(0.255)
    for o in (0, 1):
        post, _ = observation_update(tiger, np.array([1.0, 0.0]), o)
        np.testing.assert_allclose(post, [1.0, 0.0])


def test_subset_update_examples(tiger):
    x = np.array([0.3, 0.7])
    post, z = subset_observation_update(tiger, x, [0, 1])
    np.testing.assert_allclose(post, x)
    assert z == pytest.approx(1.0)
    post, z = subset_observation_update(tiger, np.array([0.5, 0.5]), [0])
    np.testing.assert_allclose(post, [0.85, 0.15])
    assert z == pytest.approx(0.5)


def test_action_observation_update_examples(tiger, maze):
    post, z = action_observation_update(tiger, np.array([0.5, 0.5]), 0, 0)
    np.testing.assert_allclose(post, [0.85, 0.15])
    assert z == pytest.approx(0.5)
    # deterministic T and O: point mass, likelihood 1
    det = PomdpModel(("p", "q"), ("go",), ("seen-p", "seen-q"),
                     np.array([[[0.0, 1.0], [0.0, 1.0]]]), np.zeros((2, 1)),
                     np.array([[[1.0, 0.0], [0.0, 1.0]]]))
    post, z = action_observation_update(det, np.array([0.4, 0.6]), 0, 1)
    np.testing.assert_allclose(post, [0.0, 1.0])
    assert z == pytest.approx(1.0)
    with pytest.raises(ImpossibleObservation):
        action_observation_update(det, np.array([0.4, 0.6]), 0, 0)


def test_impossible_observation_carries_likelihood():
    m = PomdpModel(("a", "b"), ("stay",), ("x", "y"), np.eye(2)[None], np.zeros((2, 1)),
                   np.array([[[1.0, 0.0], [0.5, 0.5]]]))
    with pytest.raises(ImpossibleObservation) as err:
        observation_update(m, np.array([1.0, 0.0]), 1)
    assert err.value.likelihood == 0.0


@settings(max_examples=60, deadline=None)
@given(beliefs(2))
def test_total_probability_tiger(x):
    m = problems.tiger()
    total = sum(observation_update(m, x, o)[1] for o in range(2))
    assert total == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(beliefs(11), st.integers(1, 2 ** 10 - 2))
def test_total_probability_partitions(x, mask):
    m = problems.hz_maze()
    inside = [o for o in range(m.n_observations) if mask >> o & 1]
    outside = [o for o in range(m.n_observations) if not mask >> o & 1]
    total = 0.0
    for part in (inside, outside):
        try:
            post, z = subset_observation_update(m, x, part)
        except ImpossibleObservation:
            continue
        assert post.min() >= 0 and post.sum() == pytest.approx(1.0, abs=1e-9)
        total += z
    assert total == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(beliefs(11), beliefs(11), st.floats(0, 1), st.integers(0, 3))
def test_transition_update_is_linear(x, y, lam, a):
    m = problems.hz_maze()
    left = transition_update(m, lam * x + (1 - lam) * y, a)
    right = lam * transition_update(m, x, a) + (1 - lam) * transition_update(m, y, a)
    np.testing.assert_allclose(left, right, atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(beliefs(3), st.integers(0, 3))
def test_uniform_observation_row_leaves_prior(x, o):
    m = PomdpModel(("a", "b", "c"), ("noop",), ("w", "x", "y", "z"), np.eye(3)[None],
                   np.zeros((3, 1)), np.full((1, 3, 4), 0.25))
    post, z = observation_update(m, x, o)
    np.testing.assert_allclose(post, as_belief(x), atol=1e-9)
    assert z == pytest.approx(0.25)
