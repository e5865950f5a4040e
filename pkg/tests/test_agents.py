import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctlbandit.agents import (
    CENTRALIZED,
    DECENTRALIZED,
    Agent,
    SyncParams,
    lambda_schedule,
    threshold_value,
)
from ctlbandit.solvers import RidgeState, ridge_estimate
from oracles import batch_ridge


def test_fresh_agent_picks_first_arm():
    arms = np.random.default_rng(0).standard_normal((7, 5))
    assert Agent(0, 5).select_arm(arms) == 0


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 9))
def test_single_coordinate_support_scans_that_coordinate(seed, j):
    arms = np.random.default_rng(seed).standard_normal((12, 10))
    agent = Agent(0, 10)
    agent.active_support = np.array([j])
    agent.theta_hat = np.array([1.0])
    best = max(range(12), key=lambda k: (arms[k, j], -k))
    assert agent.select_arm(arms) == best


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1e-3, 1e3))
def test_selection_invariant_to_positive_scaling(seed, scale):
    rng = np.random.default_rng(seed)
    arms = rng.standard_normal((8, 6))
    agent = Agent(0, 6)
    agent.theta_hat = rng.standard_normal(6)
    first = agent.select_arm(arms)
    agent.theta_hat = agent.theta_hat * scale
    assert agent.select_arm(arms) == first


def test_ties_go_to_lowest_index():
    agent = Agent(0, 2)
    agent.theta_hat = np.array([1.0, 0.0])
    assert agent.select_arm(np.array([[0.0, 1.0], [2.0, 0.0], [2.0, 5.0]])) == 1


def test_observe_grows_state():
    agent = Agent(0, 3).observe(np.array([1.0, 0.0, 2.0]), 0.5)
    assert len(agent.history) == 1
    assert not np.array_equal(agent.ridge.M, np.eye(3))


def test_observe_zero_arm():
    agent = Agent(0, 3).observe(np.zeros(3), 4.0)
    assert len(agent.history) == 1
    np.testing.assert_array_equal(agent.ridge.M, np.eye(3))
    np.testing.assert_array_equal(agent.ridge.b, 0)


def test_observe_rejects_wrong_shape():
    with pytest.raises(ValueError):
        Agent(0, 3).observe(np.ones(2), 1.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 25))
def test_restricted_updates_equal_batch(seed, n):
    rng = np.random.default_rng(seed)
    agent = Agent(0, 8).adopt_support([1, 3, 6])
    rows = rng.standard_normal((n, 8))
    rewards = rng.standard_normal(n)
    for a, r in zip(rows, rewards):
        agent.observe(a, r)
    M, b, theta = batch_ridge(rows[:, [1, 3, 6]], rewards)
    np.testing.assert_allclose(agent.ridge.M, M, atol=1e-12)
    np.testing.assert_allclose(agent.ridge.b, b, atol=1e-12)
    np.testing.assert_allclose(agent.theta_hat, theta, atol=1e-10)


def test_lambda_is_zero_at_first_round():
    assert lambda_schedule(1, 0.1, 100) == 0.0


def test_lambda_hand_value():
    # sqrt(2 * ln(e^2) * ln(e) / e^2) = sqrt(4 / e^2) = 2 / e
    assert lambda_schedule(math.e**2, 1.0, math.e) == pytest.approx(2 / math.e, rel=1e-12)
    assert lambda_schedule(7, 1.0, math.e) == pytest.approx(math.sqrt(2 * math.log(7) / 7))


@pytest.mark.parametrize("lambda0, d", [(0.1, 100), (0.5, 2), (0.01, 10_000)])
def test_lambda_decreasing_from_eight(lambda0, d):
    values = [lambda_schedule(t, lambda0, d) for t in range(8, 5000)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_lambda_rejects_bad_input():
    with pytest.raises(ValueError):
        lambda_schedule(0, 0.1, 10)
    with pytest.raises(ValueError):
        lambda_schedule(5, 0.1, 1)


def test_thresholds():
    assert threshold_value(SyncParams(N=10, mode=CENTRALIZED), 0.3) == pytest.approx(3.0)
    assert threshold_value(SyncParams(N=10, mode=DECENTRALIZED), 0.3) == pytest.approx(0.6)
    assert threshold_value(SyncParams(N=2, mode=CENTRALIZED), 0.3) == threshold_value(
        SyncParams(N=2, mode=DECENTRALIZED), 0.3
    )
    with pytest.raises(ValueError):
        threshold_value(SyncParams(), -0.1)


@pytest.mark.parametrize("kwargs", [{"xi": 1.0}, {"lambda0": 0.0}, {"N": 0}, {"mode": "mesh"}])
def test_sync_params_validation(kwargs):
    with pytest.raises(ValueError):
        SyncParams(**kwargs)


def _fed_agent(X, y):
    agent = Agent(0, X.shape[1])
    for a, r in zip(X, y):
        agent.observe(a, r)
    return agent


def test_zero_threshold_returns_nonzeros():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((40, 6))
    agent = _fed_agent(X, X @ rng.standard_normal(6))
    support = agent.local_support_estimate(1e-3, 0.0)
    np.testing.assert_array_equal(support, np.flatnonzero(agent.selector.coef_))
    assert support.size == 6


def test_over_threshold_gives_empty_set():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((40, 6))
    agent = _fed_agent(X, X @ rng.standard_normal(6))
    agent.local_support_estimate(0.01, 0.0)
    assert agent.local_support_estimate(0.01, 1.01 * np.abs(agent.selector.coef_).max()).size == 0


def test_noiseless_recovery():
    rng = np.random.default_rng(5)
    theta = np.zeros(30)
    theta[[3, 11, 20]] = [1.0, 1.5, 0.7]
    X = rng.standard_normal((200, 30))
    agent = _fed_agent(X, X @ theta)
    support = agent.local_support_estimate(0.01, 0.1)
    assert set(support) >= {3, 11, 20}
    np.testing.assert_allclose(agent.selector.coef_[[3, 11, 20]], theta[[3, 11, 20]], atol=0.05)


def test_lasso_sees_all_columns_after_reduction():
    rng = np.random.default_rng(6)
    theta = np.zeros(10)
    theta[7] = 2.0
    X = rng.standard_normal((60, 10))
    agent = _fed_agent(X, X @ theta).adopt_support([0, 1])
    assert 7 in agent.local_support_estimate(0.01, 0.5)
    assert agent.selector.n_features_in_ == 10


def test_empty_history_keeps_full_support():
    np.testing.assert_array_equal(Agent(0, 5).local_support_estimate(0.1, 0.2), np.arange(5))


def test_adopt_same_support_is_noop():
    rng = np.random.default_rng(7)
    agent = _fed_agent(rng.standard_normal((15, 5)), rng.standard_normal(15)).adopt_support([0, 2])
    agent.observe(rng.standard_normal(5), 1.0)
    before = agent.ridge.copy()
    agent.adopt_support([0, 2])
    np.testing.assert_allclose(agent.ridge.M, before.M, atol=1e-12)
    np.testing.assert_allclose(agent.ridge.b, before.b, atol=1e-12)


def test_adopt_full_support_on_fresh_agent():
    agent = Agent(0, 4).adopt_support(range(4))
    np.testing.assert_array_equal(agent.ridge.M, np.eye(4))
    np.testing.assert_array_equal(agent.theta_hat, 0)


def test_adopt_shrink_hand_computed():
    agent = Agent(0, 6)
    agent.observe(np.array([9.0, 1.0, 9.0, 9.0, 2.0, 9.0]), 1.0)
    agent.observe(np.array([9.0, 0.0, 9.0, 9.0, 1.0, 9.0]), 2.0)
    agent.observe(np.array([9.0, 3.0, 9.0, 9.0, -1.0, 9.0]), -1.0)
    agent.adopt_support([4, 1])
    # restricted rows (1, 2), (0, 1), (3, -1)
    # M = I + [[1+0+9, 2+0-3], [2+0-3, 4+1+1]], b = 1*(1,2) + 2*(0,1) - 1*(3,-1)
    np.testing.assert_array_equal(agent.active_support, [1, 4])
    np.testing.assert_allclose(agent.ridge.M, [[11.0, -1.0], [-1.0, 7.0]])
    np.testing.assert_allclose(agent.ridge.b, [-2.0, 5.0])
    np.testing.assert_allclose(agent.theta_hat, np.linalg.solve([[11, -1], [-1, 7]], [-2, 5]))


def test_empty_support_falls_back_to_first_coordinate(caplog):
    agent = Agent(3, 5).observe(np.arange(5.0), 1.0)
    with caplog.at_level("INFO"):
        agent.adopt_support([])
    np.testing.assert_array_equal(agent.active_support, [0])
    assert agent.n_fallbacks == 1
    assert "falling back" in caplog.text
    assert agent.ridge.M.shape == (1, 1)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sets(st.integers(0, 11), min_size=1))
def test_rebuild_matches_fresh_state(seed, support):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-5, 5, (20, 12))
    y = rng.standard_normal(20)
    agent = _fed_agent(X, y).adopt_support(sorted(support))
    cols = sorted(support)
    fresh = RidgeState.identity(cols)
    for a, r in zip(X[:, cols], y):
        fresh.update(a, r)
    np.testing.assert_allclose(agent.theta_hat, ridge_estimate(fresh), atol=1e-10, rtol=0)
    np.testing.assert_array_equal(agent.ridge.support, agent.active_support)
    assert agent.theta_hat.shape == (len(cols),)
