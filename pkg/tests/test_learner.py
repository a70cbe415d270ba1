"""Target recursion, loss and training-step contracts."""
import dataclasses

import numpy as np
import pytest

from gridgoals import learner, uvfa
from gridgoals.learner import (LearnerConfig, Trajectory, loss, oracle_targets_from_q,
                               targets_from_q, train_step, truncated_targets)
from helpers import random_trajectory, synthetic_task_set

DIMS = uvfa.NetDims(obs_dim=10, goal_dim=3, num_actions=4, num_goals=3,
                    repr_dim=6, hidden_dim=8)


def no_truncation_inputs(h=4, a=3):
    """Q table and trajectory fields where every step matches the greedy action."""
    q = np.zeros((h + 1, a))
    q[:, 0] = 1.0  # greedy action is 0 everywhere
    actions = np.zeros(h, dtype=int)
    eps = np.zeros(h, dtype=bool)
    terms = np.zeros(h, dtype=bool)
    on_policy = np.zeros(h, dtype=bool)
    return q, actions, eps, terms, on_policy


def test_immediate_mismatch_reduces_to_one_step_target():
    h, a = 4, 3
    q, actions, eps, terms, on_policy = no_truncation_inputs(h, a)
    q[1] = [0.2, 0.9, 0.1]  # greedy at t=1 is action 1, logged action is 0
    rewards = np.zeros(h)
    targets, truncated = targets_from_q(q, rewards, actions, eps, terms, on_policy, 0.9)
    assert targets[0] == pytest.approx(0.9 * 0.9)  # gamma * max_a Q(s_1, a)
    assert truncated[0]


def test_matched_accumulation_with_bootstrap():
    # gamma=0.5, rewards [1,0,0], all matched, bootstrap value 0.8 at the horizon
    q, actions, eps, terms, on_policy = no_truncation_inputs(h=3, a=2)
    q[3] = [0.8, 0.1]
    rewards = np.array([1.0, 0.0, 0.0])
    targets, truncated = targets_from_q(q, rewards, actions, eps, terms, on_policy, 0.5)
    assert targets[0] == pytest.approx(1.0 + 0.125 * 0.8)  # 1.1
    assert not truncated.any()


def test_terminal_stops_bootstrap():
    q, actions, eps, terms, on_policy = no_truncation_inputs(h=4, a=2)
    q += 5.0  # any bootstrap term would be clearly visible
    rewards = np.array([0.0, 0.0, 1.0, 0.0])
    terms[2] = True
    targets, truncated = targets_from_q(q, rewards, actions, eps, terms, on_policy, 0.5)
    assert targets[2] == 1.0  # terminal: reward only, bootstrap value 0
    assert targets[1] == pytest.approx(0.5 * 1.0)
    assert targets[0] == pytest.approx(0.25 * 1.0)
    assert not truncated[:3].any()


def test_epsilon_flag_truncates_only_on_policy():
    q, actions, eps, terms, _ = no_truncation_inputs(h=3, a=2)
    eps[1] = True
    rewards = np.zeros(3)
    q[1] = [0.7, 0.2]
    off_targets, off_trunc = targets_from_q(q, rewards, actions, eps, terms,
                                            np.zeros(3, dtype=bool), 0.9)
    on_targets, on_trunc = targets_from_q(q, rewards, actions, eps, terms,
                                          np.ones(3, dtype=bool), 0.9)
    assert not off_trunc[0]  # action matched greedy, off-policy goal ignores the flag
    assert on_trunc[0]  # on-policy goal treats the exploratory step as a mismatch
    assert on_targets[0] == pytest.approx(0.9 * 0.7)
    assert off_targets[0] != on_targets[0]


def test_targets_match_recursive_oracle_exactly():
    rng = np.random.default_rng(0)
    for _ in range(200):
        h = int(rng.integers(1, 21))
        a = int(rng.integers(2, 5))
        gamma = float(rng.uniform(0, 0.99))
        q = rng.normal(size=(h + 1, a))
        rewards = rng.integers(0, 2, size=h).astype(float)
        actions = rng.integers(0, a, size=h)
        eps = rng.random(h) < 0.25
        terms = rng.random(h) < 0.2
        on_policy = rng.random(h) < 0.5
        got, _ = targets_from_q(q, rewards, actions, eps, terms, on_policy, gamma)
        want = oracle_targets_from_q(q, rewards, actions, eps, terms, on_policy, gamma)
        assert np.array_equal(got, want)


def test_truncated_targets_op_equals_oracle_on_same_q_table():
    rng = np.random.default_rng(1)
    ts = synthetic_task_set(k=3, d=DIMS.goal_dim)
    params = uvfa.init_params(DIMS, seed=0)
    for _ in range(20):
        traj = random_trajectory(rng, h=6, k=3, obs_dim=DIMS.obs_dim,
                                 num_actions=DIMS.num_actions)
        for i in range(3):
            got = truncated_targets(traj, i, params, ts, gamma=0.95)
            q = np.stack([uvfa.q_values(params, o, ts.goal_matrix[i])[0]
                          for o in traj.observations])
            want = oracle_targets_from_q(q, traj.reward_vectors[:, i], traj.actions,
                                         traj.epsilon_flags, traj.terminal_flags,
                                         traj.behavior_goals == i, 0.95)
            assert np.array_equal(got, want)


def test_rewards_past_truncation_do_not_contribute():
    # the number of accumulated reward terms is capped by the first mismatch
    rng = np.random.default_rng(2)
    for _ in range(100):
        h = int(rng.integers(2, 12))
        a = 3
        q = rng.normal(size=(h + 1, a))
        rewards = rng.normal(size=h)
        actions = rng.integers(0, a, size=h)
        eps = np.zeros(h, dtype=bool)
        terms = np.zeros(h, dtype=bool)
        on_policy = np.zeros(h, dtype=bool)
        greedy = q[:h].argmax(axis=1)
        match = actions == greedy
        base, _ = targets_from_q(q, rewards, actions, eps, terms, on_policy, 0.9)
        cut = next((t for t in range(1, h) if not match[t]), h)
        tampered = rewards.copy()
        tampered[cut:] = 1e6  # beyond G_0's accumulation window
        after, _ = targets_from_q(q, tampered, actions, eps, terms, on_policy, 0.9)
        assert after[0] == base[0]


def test_no_truncation_for_perfectly_greedy_on_policy_goal():
    q, actions, eps, terms, _ = no_truncation_inputs(h=6, a=3)
    rewards = np.ones(6)
    on_policy = np.ones(6, dtype=bool)
    targets, truncated = targets_from_q(q, rewards, actions, eps, terms, on_policy, 0.9)
    assert not truncated.any()
    # full n-step sum to the horizon plus the bootstrap
    want = sum(0.9 ** k for k in range(6)) + 0.9 ** 6 * 1.0
    assert targets[0] == pytest.approx(want)


def make_batch(rng, b=3, h=5, k=3):
    return [random_trajectory(rng, h=h, k=k, obs_dim=DIMS.obs_dim,
                              num_actions=DIMS.num_actions) for _ in range(b)]


def test_loss_zero_when_targets_equal_q():
    # zero head weights and zero rewards make every Q and every target zero
    params = uvfa.init_params(DIMS, seed=1)
    params = dataclasses.replace(params, w2=np.zeros_like(params.w2))
    rng = np.random.default_rng(3)
    batch = make_batch(rng)
    for traj in batch:
        traj.reward_vectors[:] = 0.0
    ts = synthetic_task_set(k=3, d=DIMS.goal_dim)
    value, grads = loss(batch, params, ts, gamma=0.95)
    assert value == 0.0
    for g in grads.values():
        assert not g.any()


def test_loss_single_example_value():
    # one trajectory, one goal, one step: target 1.0 against Q=0.5 -> 0.125
    params = uvfa.init_params(DIMS, seed=2)
    ts = synthetic_task_set(k=1, d=DIMS.goal_dim)
    rng = np.random.default_rng(4)
    traj = random_trajectory(rng, h=1, k=1, obs_dim=DIMS.obs_dim,
                             num_actions=DIMS.num_actions)
    traj.terminal_flags[:] = True  # target is exactly the reward
    q0 = uvfa.q_values(params, traj.observations[0], ts.goal_matrix[0])[0,
                                                                        traj.actions[0]]
    traj.reward_vectors[0, 0] = q0 + 0.5  # TD error of exactly 0.5
    value, _ = loss([traj], params, ts, gamma=0.95)
    assert value == pytest.approx(0.125)


def test_loss_matches_per_element_scalar_loop():
    rng = np.random.default_rng(5)
    params = uvfa.init_params(DIMS, seed=3)
    ts = synthetic_task_set(k=3, d=DIMS.goal_dim, learnable=[True, False, True])
    batch = make_batch(rng, b=4, h=6, k=3)
    value, _ = loss(batch, params, ts, gamma=0.9)
    want = 0.0
    for traj in batch:
        for i in range(3):
            if not ts.learnable[i]:
                continue
            targets = truncated_targets(traj, i, params, ts, gamma=0.9)
            for t in range(traj.unroll):
                q = uvfa.q_values(params, traj.observations[t], ts.goal_matrix[i])[0]
                want += 0.5 * (targets[t] - q[traj.actions[t]]) ** 2
    assert value == pytest.approx(want, rel=1e-10)


def test_fused_gradients_match_generic_op():
    # the shared-encoder backward must agree with per-example uvfa.gradients
    rng = np.random.default_rng(6)
    params = uvfa.init_params(DIMS, seed=4)
    ts = synthetic_task_set(k=3, d=DIMS.goal_dim, learnable=[True, True, False])
    batch = make_batch(rng, b=3, h=5, k=3)
    value, grads = loss(batch, params, ts, gamma=0.9)

    obs_rows, goal_rows, action_rows, target_rows = [], [], [], []
    for traj in batch:
        for i in np.flatnonzero(ts.learnable):
            targets = truncated_targets(traj, i, params, ts, gamma=0.9)
            for t in range(traj.unroll):
                obs_rows.append(traj.observations[t])
                goal_rows.append(ts.goal_matrix[i])
                action_rows.append(traj.actions[t])
                target_rows.append(targets[t])
    want_value, want_grads = uvfa.gradients(params, np.stack(obs_rows),
                                            np.stack(goal_rows), np.array(action_rows),
                                            np.array(target_rows))
    assert value == pytest.approx(want_value, rel=1e-10)
    for name in grads:
        num = np.linalg.norm(grads[name] - want_grads[name])
        den = max(np.linalg.norm(want_grads[name]), 1e-12)
        assert num / den < 1e-9, name


def test_train_step_no_change_on_zero_signal():
    params = uvfa.init_params(DIMS, seed=5)
    params = dataclasses.replace(params, w2=np.zeros_like(params.w2))
    opt = uvfa.init_opt_state(params)
    rng = np.random.default_rng(7)
    cfg = LearnerConfig(batch_size=3, unroll=5)
    ts = synthetic_task_set(k=3, d=DIMS.goal_dim)
    batch = make_batch(rng, b=3, h=5, k=3)
    for traj in batch:
        traj.reward_vectors[:] = 0.0
    new_params, _, metrics = train_step(batch, params, opt, ts, cfg)
    assert metrics.loss == 0.0
    for name in params.tensors():
        assert np.array_equal(new_params.tensors()[name], params.tensors()[name])


def test_train_step_enforces_batch_size():
    params = uvfa.init_params(DIMS, seed=6)
    opt = uvfa.init_opt_state(params)
    ts = synthetic_task_set(k=3, d=DIMS.goal_dim)
    rng = np.random.default_rng(8)
    with pytest.raises(ValueError):
        train_step(make_batch(rng, b=2), params, opt, ts, LearnerConfig(batch_size=3))


def test_repeated_batch_descends_on_most_seeds():
    ts = synthetic_task_set(k=3, d=DIMS.goal_dim)
    cfg = LearnerConfig(batch_size=3, unroll=5, learning_rate=1e-4)
    improved = 0
    for seed in range(20):
        rng = np.random.default_rng(1000 + seed)
        params = uvfa.init_params(DIMS, seed=seed)
        opt = uvfa.init_opt_state(params, learning_rate=cfg.learning_rate)
        batch = make_batch(rng, b=3, h=5, k=3)
        params1, opt1, m1 = train_step(batch, params, opt, ts, cfg)
        _, _, m2 = train_step(batch, params1, opt1, ts, cfg)
        if m2.loss <= m1.loss:
            improved += 1
    assert improved >= 18  # at least 90% of seeds


def test_truncation_rate_strictly_interior_for_random_behavior():
    ts = synthetic_task_set(k=3, d=DIMS.goal_dim)
    cfg = LearnerConfig(batch_size=2, unroll=8)
    rng = np.random.default_rng(9)
    params = uvfa.init_params(DIMS, seed=7)
    opt = uvfa.init_opt_state(params)
    rates = []
    for _ in range(100):
        batch = make_batch(rng, b=2, h=8, k=3)
        _, _, metrics = train_step(batch, params, opt, ts, cfg)
        rates.append(metrics.truncation_rate)
    mean_rate = np.mean(rates)
    assert 0.0 < mean_rate < 1.0


def test_target_freeze_against_later_perturbation():
    rng = np.random.default_rng(10)
    params = uvfa.init_params(DIMS, seed=8)
    ts = synthetic_task_set(k=2, d=DIMS.goal_dim)
    traj = random_trajectory(rng, h=6, k=2, obs_dim=DIMS.obs_dim,
                             num_actions=DIMS.num_actions)
    targets = truncated_targets(traj, 0, params, ts, gamma=0.9)
    perturbed = dataclasses.replace(params, w2=params.w2 + 0.5)
    q_before = uvfa.q_values(params, traj.observations[0], ts.goal_matrix[0])
    q_after = uvfa.q_values(perturbed, traj.observations[0], ts.goal_matrix[0])
    assert not np.allclose(q_before, q_after)  # the loss-side Q moved...
    again = truncated_targets(traj, 0, params, ts, gamma=0.9)
    assert np.array_equal(targets, again)  # ...but the frozen targets did not


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_loss_aborts():
    params = uvfa.init_params(DIMS, seed=9)
    opt = uvfa.init_opt_state(params)
    ts = synthetic_task_set(k=3, d=DIMS.goal_dim)
    rng = np.random.default_rng(11)
    batch = make_batch(rng, b=2, h=5, k=3)
    batch[0].observations[0, 0] = np.inf
    with pytest.raises(FloatingPointError):
        train_step(batch, params, opt, ts, LearnerConfig(batch_size=2))
