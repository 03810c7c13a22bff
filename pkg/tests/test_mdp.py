"""Tabular MDP construction and exact policy evaluation."""

import numpy as np
import pytest

from confope import PolicyTable, TabularMDP, ValueTable, bellman_apply, policy_value, zero_values
from confope.errors import DimensionError, ValidationError


def small_mdp(discount=0.9):
    P = np.array([
        [[0.7, 0.3], [0.2, 0.8]],
        [[0.5, 0.5], [0.9, 0.1]],
    ])
    R = np.array([
        [[1.0, -1.0], [0.5, 0.0]],
        [[0.0, 2.0], [-0.5, 1.0]],
    ])
    chi = np.array([0.6, 0.4])
    return TabularMDP(2, 2, P, R, chi, discount=discount)


def enumerate_value(mdp, policy, horizon):
    """Brute-force oracle: sum over all length-T trajectories."""
    total = 0.0
    X, A = mdp.n_states, mdp.n_actions

    def recurse(x, t, prob, disc):
        nonlocal total
        if t == horizon:
            return
        for a in range(A):
            pa = policy.probs[x, a]
            if pa == 0.0:
                continue
            for y in range(X):
                py = mdp.transitions[x, a, y]
                if py == 0.0:
                    continue
                pr = prob * pa * py
                total += pr * disc * mdp.rewards[x, a, y]
                recurse(y, t + 1, pr, disc * mdp.discount)

    for x0 in range(X):
        if mdp.initial_dist[x0] > 0.0:
            recurse(x0, 0, mdp.initial_dist[x0], 1.0)
    return total


def test_policy_value_matches_trajectory_enumeration():
    mdp = small_mdp()
    policy = PolicyTable(np.array([[0.3, 0.7], [0.8, 0.2]]))
    for horizon in (1, 2, 3, 4):
        _, v = policy_value(mdp, policy, horizon)
        oracle = enumerate_value(mdp, policy, horizon)
        assert abs(v - oracle) <= 1e-10


def test_value_monotone_in_rewards():
    mdp = small_mdp()
    policy = PolicyTable(np.array([[0.5, 0.5], [0.5, 0.5]]))
    _, v1 = policy_value(mdp, policy, 4)
    bumped = TabularMDP(
        2, 2, mdp.transitions, np.asarray(mdp.rewards) + 0.25,
        mdp.initial_dist, mdp.discount,
    )
    _, v2 = policy_value(bumped, policy, 4)
    assert v2 > v1


def test_zero_discount_value_is_one_step_reward():
    mdp = small_mdp(discount=0.0)
    policy = PolicyTable(np.array([[0.4, 0.6], [0.1, 0.9]]))
    _, v1 = policy_value(mdp, policy, 1)
    for horizon in (2, 5, 11):
        _, v = policy_value(mdp, policy, horizon)
        assert abs(v - v1) <= 1e-12


def test_horizon_zero_is_zero():
    mdp = small_mdp()
    policy = PolicyTable(np.array([[0.5, 0.5], [0.5, 0.5]]))
    vt, v = policy_value(mdp, policy, 0)
    assert v == 0.0
    assert np.all(vt.values == 0.0)


def test_bellman_apply_tracks_horizon():
    mdp = small_mdp()
    policy = PolicyTable(np.array([[1.0, 0.0], [0.0, 1.0]]))
    q = bellman_apply(mdp, policy, zero_values(2))
    assert q.horizon == 1
    assert q.values.shape == (2, 2)
    # one-step Q is just the expected immediate reward
    expected = np.einsum("xay,xay->xa", mdp.transitions, mdp.rewards)
    assert np.allclose(q.values, expected, atol=1e-12)


def test_json_round_trip():
    mdp = small_mdp()
    again = TabularMDP.from_json(mdp.to_json())
    assert again.n_states == mdp.n_states
    assert again.discount == mdp.discount
    assert np.array_equal(again.transitions, mdp.transitions)
    assert np.array_equal(again.rewards, mdp.rewards)
    assert np.array_equal(again.initial_dist, mdp.initial_dist)


def test_arrays_are_immutable():
    mdp = small_mdp()
    with pytest.raises(ValueError):
        mdp.transitions[0, 0, 0] = 0.5


def test_row_sum_validation():
    P = np.full((2, 2, 2), 0.5)
    P[0, 0] = [0.6, 0.6]
    with pytest.raises(ValidationError):
        TabularMDP(2, 2, P, np.zeros((2, 2, 2)), np.array([1.0, 0.0]), 1.0)


def test_negative_probability_rejected():
    P = np.full((2, 2, 2), 0.5)
    P[1, 1] = [-0.1, 1.1]
    with pytest.raises(ValidationError):
        TabularMDP(2, 2, P, np.zeros((2, 2, 2)), np.array([1.0, 0.0]), 1.0)


def test_shape_validation():
    with pytest.raises(DimensionError):
        TabularMDP(2, 2, np.full((2, 2, 3), 1 / 3), np.zeros((2, 2, 2)),
                   np.array([1.0, 0.0]), 1.0)


def test_nonzero_horizon_zero_values_rejected():
    with pytest.raises(ValidationError):
        ValueTable(np.array([1.0, 0.0]), horizon=0)


def test_policy_table_validation():
    with pytest.raises(ValidationError):
        PolicyTable(np.array([[0.5, 0.6]]))
