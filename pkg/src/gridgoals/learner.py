"""Training step: truncated n-step bootstrapped targets and the summed TD loss.

Returns accumulate rewards forward while the logged action matches the
goal-conditioned greedy action, and bootstrap from max-Q at the first
mismatch, at an episode boundary (value 0) or at the end of the unroll.
For the behavior goal a step also counts as a mismatch when the action came
from the exploration branch. Targets are computed from the current
parameters (no target network) and treated as constants in the loss.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import uvfa
from .env import TaskSet


@dataclass
class Trajectory:
    """An H-step rollout segment plus the extra observation used to bootstrap.

    `behavior_goals` is per step: a segment that spans an episode boundary
    carries the goal pursued on each side of it.
    """

    observations: np.ndarray  # (H+1, obs_dim)
    actions: np.ndarray  # (H,) int
    reward_vectors: np.ndarray  # (H, K)
    epsilon_flags: np.ndarray  # (H,) bool, true where the action was exploratory
    terminal_flags: np.ndarray  # (H,) bool, true where the transition ended an episode
    behavior_goals: np.ndarray  # (H,) int, goal index pursued at each step
    snapshot_version: int = 0
    actor_id: int = 0
    sequence: int = 0

    @property
    def unroll(self) -> int:
        return len(self.actions)

    @property
    def behavior_goal_index(self) -> int:
        return int(self.behavior_goals[0])

    @property
    def tag(self) -> tuple[int, int]:
        return (self.actor_id, self.sequence)


@dataclass(frozen=True)
class LearnerConfig:
    discount: float = 0.95
    unroll: int = 20
    batch_size: int = 32
    learning_rate: float = 2e-4
    rms_decay: float = 0.99
    rms_epsilon: float = 0.01


@dataclass
class StepMetrics:
    loss: float
    truncation_rate: float
    per_goal_td: np.ndarray  # (K,) mean |TD error| per goal, nan where not learnable
    num_targets: int


def targets_from_q(q: np.ndarray, rewards: np.ndarray, actions: np.ndarray,
                   epsilon_flags: np.ndarray, terminal_flags: np.ndarray,
                   on_policy: np.ndarray, gamma: float):
    """Vectorized target recursion given the (H+1, A) table of Q-values.

    `on_policy[t]` marks steps where the target's goal was the behavior goal,
    which makes exploration flags count as mismatches. Returns (targets,
    truncated) where `truncated[t]` says the accumulation for t was cut by an
    action mismatch before the horizon or a terminal.
    """
    h = len(actions)
    greedy = np.argmax(q[:h], axis=1)
    match = (actions == greedy) & ~(on_policy & epsilon_flags)
    boot = np.max(q, axis=1)  # boot[t+1] bootstraps targets ending at t
    targets = np.empty(h)
    truncated = np.empty(h, dtype=bool)
    for t in range(h - 1, -1, -1):
        if terminal_flags[t]:
            targets[t] = rewards[t]
            truncated[t] = False
        elif t == h - 1:
            targets[t] = rewards[t] + gamma * boot[t + 1]
            truncated[t] = False
        elif match[t + 1]:
            targets[t] = rewards[t] + gamma * targets[t + 1]
            truncated[t] = truncated[t + 1]
        else:
            targets[t] = rewards[t] + gamma * boot[t + 1]
            truncated[t] = True
    return targets, truncated


def oracle_targets_from_q(q: np.ndarray, rewards: np.ndarray, actions: np.ndarray,
                          epsilon_flags: np.ndarray, terminal_flags: np.ndarray,
                          on_policy: np.ndarray, gamma: float) -> np.ndarray:
    """Literal recursive definition G_t = r + gamma * (match ? G_{t+1} : max Q).

    Kept deliberately naive and scalar as the reference the fast path is
    checked against.
    """
    h = len(actions)

    def matches(t):
        ok = actions[t] == int(np.argmax(q[t]))
        if on_policy[t] and epsilon_flags[t]:
            ok = False
        return ok

    def g(t):
        if terminal_flags[t]:
            return rewards[t]
        if t == h - 1:
            return rewards[t] + gamma * max(q[t + 1])
        if matches(t + 1):
            return rewards[t] + gamma * g(t + 1)
        return rewards[t] + gamma * max(q[t + 1])

    return np.array([g(t) for t in range(h)])


def truncated_targets(traj: Trajectory, goal_index: int, params: uvfa.NetParams,
                      task_set: TaskSet, gamma: float = 0.95) -> np.ndarray:
    """Targets for one goal over a trajectory, constants w.r.t. the parameters."""
    goal_row = task_set.goal_matrix[goal_index]
    q = np.stack([uvfa.q_values(params, obs, goal_row)[0] for obs in traj.observations])
    targets, _ = targets_from_q(
        q, traj.reward_vectors[:, goal_index], traj.actions, traj.epsilon_flags,
        traj.terminal_flags, traj.behavior_goals == goal_index, gamma)
    return targets


def _batch_q_tensor(params: uvfa.NetParams, obs: np.ndarray, goal_rows: np.ndarray):
    """Forward pass over N observations x KL goals with the encoder shared.

    The head's first layer is evaluated as two partial products (observation
    part broadcast over goals, goal part folded into a per-goal bias), which
    is the same affine map as concatenating the inputs. Returns the caches
    needed for the backward pass; relu masks are recovered from the outputs.
    """
    repr_dim = params.w_enc.shape[0]
    f = obs @ params.w_enc.T + params.b_enc  # (N, R)
    np.maximum(f, 0.0, out=f)
    ff = f @ params.w1[:, :repr_dim].T  # (N, hidden)
    gg = goal_rows @ params.w1[:, repr_dim:].T + params.b1  # (KL, hidden)
    h = ff[:, None, :] + gg[None, :, :]  # (N, KL, hidden)
    np.maximum(h, 0.0, out=h)
    q = h @ params.w2.T + params.b2  # (N, KL, A)
    return f, h, q


def _compute_targets(q4: np.ndarray, rewards: np.ndarray, actions: np.ndarray,
                     eps: np.ndarray, terms: np.ndarray, on_policy: np.ndarray,
                     gamma: float):
    """Target recursion vectorized over (B, KL) lanes; q4 is (B, H+1, KL, A)."""
    b, h1, kl, _ = q4.shape
    h = h1 - 1
    greedy = q4.argmax(axis=3)  # (B, H+1, KL)
    maxq = q4.max(axis=3)
    match = (actions[:, :, None] == greedy[:, :h, :]) & ~(on_policy & eps[:, :, None])
    targets = np.empty((b, h, kl))
    truncated = np.empty((b, h, kl), dtype=bool)
    for t in range(h - 1, -1, -1):
        boot = maxq[:, t + 1, :]
        if t == h - 1:
            cont = boot
            trunc_t = np.zeros((b, kl), dtype=bool)
        else:
            cont = np.where(match[:, t + 1, :], targets[:, t + 1, :], boot)
            trunc_t = np.where(match[:, t + 1, :], truncated[:, t + 1, :], True)
        term = terms[:, t][:, None]
        targets[:, t, :] = rewards[:, t, :] + gamma * np.where(term, 0.0, cont)
        truncated[:, t, :] = np.where(term, False, trunc_t)
    return targets, truncated


def _loss_and_grads(batch: list[Trajectory], params: uvfa.NetParams,
                    task_set: TaskSet, gamma: float):
    """Shared-encoder loss/gradient over a batch; exact same math as stacking
    one (observation, goal, action, target) example per step and goal."""
    b = len(batch)
    h = batch[0].unroll
    learn_idx = np.flatnonzero(task_set.learnable)
    kl = len(learn_idx)
    goal_rows = task_set.goal_matrix[learn_idx]

    obs = np.stack([t.observations for t in batch])  # (B, H+1, D)
    actions = np.stack([t.actions for t in batch])
    eps = np.stack([t.epsilon_flags for t in batch])
    terms = np.stack([t.terminal_flags for t in batch])
    behavior = np.stack([t.behavior_goals for t in batch])
    rewards = np.stack([t.reward_vectors for t in batch])[:, :, learn_idx]
    on_policy = behavior[:, :, None] == learn_idx[None, None, :]

    n = b * (h + 1)
    flat_obs = obs.reshape(n, -1)
    f, hrelu, q = _batch_q_tensor(params, flat_obs, goal_rows)
    q4 = q.reshape(b, h + 1, kl, -1)

    targets, truncated = _compute_targets(q4, rewards, actions, eps, terms,
                                          on_policy, gamma)

    q_sel = q4[np.arange(b)[:, None, None], np.arange(h)[None, :, None],
               np.arange(kl)[None, None, :], actions[:, :, None]]  # (B, H, KL)
    delta = q_sel - targets
    loss = 0.5 * float(np.sum(delta * delta))

    dq4 = np.zeros_like(q4)
    dq4[np.arange(b)[:, None, None], np.arange(h)[None, :, None],
        np.arange(kl)[None, None, :], actions[:, :, None]] = delta
    dq = dq4.reshape(n, kl, -1)

    a_dim = params.w2.shape[0]
    g_w2 = dq.reshape(-1, a_dim).T @ hrelu.reshape(-1, params.w2.shape[1])
    g_b2 = dq.sum(axis=(0, 1))
    dz1 = dq @ params.w2
    dz1 *= hrelu > 0  # relu mask: the pre-activation is positive iff the output is
    dz1_obs = dz1.sum(axis=1)  # (N, hidden): goal dimension collapsed
    repr_dim = params.w_enc.shape[0]
    g_w1 = np.concatenate([dz1_obs.T @ f, dz1.sum(axis=0).T @ goal_rows], axis=1)
    g_b1 = dz1.sum(axis=(0, 1))
    dz_enc = dz1_obs @ params.w1[:, :repr_dim]
    dz_enc *= f > 0
    g_we = dz_enc.T @ flat_obs
    g_be = dz_enc.sum(axis=0)

    grads = {"w_enc": g_we, "b_enc": g_be, "w1": g_w1, "b1": g_b1,
             "w2": g_w2, "b2": g_b2}

    per_goal_td = np.full(task_set.num_tasks, np.nan)
    per_goal_td[learn_idx] = np.abs(delta).mean(axis=(0, 1))
    metrics = StepMetrics(loss=loss, truncation_rate=float(truncated.mean()),
                          per_goal_td=per_goal_td, num_targets=int(delta.size))
    return loss, grads, metrics


def loss(batch: list[Trajectory], params: uvfa.NetParams, task_set: TaskSet,
         gamma: float = 0.95):
    """Half the summed squared TD error over the batch, unroll and learnable
    goals, with the matching exact gradients."""
    value, grads, _ = _loss_and_grads(batch, params, task_set, gamma)
    return value, grads


def train_step(batch: list[Trajectory], params: uvfa.NetParams,
               opt_state: uvfa.OptState, task_set: TaskSet,
               config: LearnerConfig):
    """One gradient computation (targets frozen against current params) and one
    RMSProp update. Returns (params', opt_state', StepMetrics)."""
    if len(batch) != config.batch_size:
        raise ValueError(f"expected a batch of {config.batch_size} trajectories, "
                         f"got {len(batch)}")
    value, grads, metrics = _loss_and_grads(batch, params, task_set, config.discount)
    if not np.isfinite(value):
        raise FloatingPointError(f"training loss became non-finite ({value})")
    new_params, new_opt = uvfa.rmsprop_step(params, opt_state, grads)
    return new_params, new_opt, metrics
