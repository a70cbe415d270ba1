"""Experience generation: per-episode goal sampling and epsilon-greedy rollouts.

An actor owns one environment instance and one random stream. It samples a
behavior goal uniformly at each episode start, acts greedily under the most
recent parameter snapshot with an annealed exploration rate driven by the
global frame count, and cuts its experience into fixed-length trajectory
segments carrying the full reward vector of every step.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import env as genv
from . import uvfa
from .learner import Trajectory


@dataclass(frozen=True)
class ActorConfig:
    epsilon_start: float = 1.0
    epsilon_end: float = 0.01
    epsilon_anneal_frames: int = 1_000_000
    unroll: int = 20
    evaluation_mode: bool = False  # evaluation actors emit metrics, never trajectories


def sample_goal(rng: np.random.Generator, num_train: int) -> int:
    """Uniform over the training-goal indices; held fixed for a whole episode."""
    return int(rng.integers(num_train))


def epsilon_at(global_frames: int, config: ActorConfig) -> float:
    """Linear anneal from epsilon_start to epsilon_end, then clamped."""
    if config.epsilon_anneal_frames <= 0:
        return config.epsilon_end
    frac = min(1.0, global_frames / config.epsilon_anneal_frames)
    return config.epsilon_start + frac * (config.epsilon_end - config.epsilon_start)


def act(q_row: np.ndarray, epsilon: float, rng: np.random.Generator) -> tuple[int, bool]:
    """Epsilon-greedy pick over one row of Q-values.

    The exploration flag is true whenever the exploration branch fired, even
    if the sampled action happens to coincide with the greedy one. Greedy
    ties break toward the lowest action index.
    """
    if rng.random() < epsilon:
        return int(rng.integers(len(q_row))), True
    return int(np.argmax(q_row)), False


class Actor:
    """One experience worker: owns an environment, a goal and a random stream.

    Shared surfaces are read-only parameter snapshots and the global frame
    counter; nothing else crosses thread boundaries.
    """

    def __init__(self, actor_id: int, env_config: genv.EnvConfig, task_set: genv.TaskSet,
                 config: ActorConfig, seed: int, frame_counter, fixed_goal: int | None = None):
        self.actor_id = actor_id
        self.env_config = env_config
        self.task_set = task_set
        self.config = config
        self.frames = frame_counter
        self.fixed_goal = fixed_goal
        self.rng = np.random.default_rng([seed, actor_id, 0xAC])
        self._sequence = 0
        self._state: genv.WorldState | None = None
        self._obs: np.ndarray | None = None
        self._sparse = None
        self._obs_dim = genv.observation_dim(env_config, task_set.num_types)
        self._goal = 0
        self._head_cache = None
        self._cached_params = None

    def _begin_episode(self):
        episode_seed = int(self.rng.integers(2**63))
        if self.fixed_goal is not None:
            self._goal = self.fixed_goal
        else:
            self._goal = sample_goal(self.rng, self.task_set.num_train)
        self._state = genv.reset(self.env_config, episode_seed)
        self._observe()
        self._head_cache = None

    def _observe(self):
        self._sparse = genv.observe_sparse(self._state, self.task_set)
        obs = np.zeros(self._obs_dim)
        obs[self._sparse[0]] = 1.0
        obs[-1] = self._sparse[1]
        self._obs = obs

    def _q_row(self, params: uvfa.NetParams) -> np.ndarray:
        if self._head_cache is None or self._cached_params is not params:
            self._head_cache = uvfa.head_cache(params, self.task_set.goal_matrix[self._goal])
            self._cached_params = params
        return uvfa.q_single_sparse(params, self._sparse[0], self._sparse[1],
                                    self._head_cache)

    def run_rollout(self, params: uvfa.NetParams, unroll: int | None = None,
                    snapshot_version: int = 0) -> Trajectory:
        """Record exactly `unroll` transitions, resetting inline at episode ends.

        The goal is resampled at every episode boundary and recorded per step;
        the observation after the last transition is appended for bootstrapping.
        """
        h = unroll if unroll is not None else self.config.unroll
        if self._state is None:
            self._begin_episode()
        observations = []
        actions = np.empty(h, dtype=np.int64)
        rewards = np.empty((h, self.task_set.num_tasks))
        eps_flags = np.empty(h, dtype=bool)
        terminals = np.empty(h, dtype=bool)
        goals = np.empty(h, dtype=np.int64)
        for t in range(h):
            observations.append(self._obs)
            epsilon = epsilon_at(self.frames.value, self.config)
            action, flag = act(self._q_row(params), epsilon, self.rng)
            goals[t] = self._goal
            _, reward_vec, terminal = genv.step(self._state, action, self.task_set)
            self._state.prev_reward = float(reward_vec[self._goal])
            self.frames.add(1)
            actions[t] = action
            rewards[t] = reward_vec
            eps_flags[t] = flag
            terminals[t] = terminal
            if terminal:
                self._begin_episode()
            else:
                self._observe()
        observations.append(self._obs)
        traj = Trajectory(
            observations=np.stack(observations),
            actions=actions,
            reward_vectors=rewards,
            epsilon_flags=eps_flags,
            terminal_flags=terminals,
            behavior_goals=goals,
            snapshot_version=snapshot_version,
            actor_id=self.actor_id,
            sequence=self._sequence,
        )
        self._sequence += 1
        return traj


def run_episode_counts(params: uvfa.NetParams | None, goal_vector: np.ndarray | None,
                       env_config: genv.EnvConfig, task_set: genv.TaskSet,
                       epsilon: float, rng: np.random.Generator,
                       reward_index: int | None = None) -> np.ndarray:
    """Play one full episode and return the per-task reward counts.

    With params=None the policy is uniform random (the random baseline).
    `reward_index` selects which component feeds the previous-reward
    observation channel; None uses the sum of all components.
    """
    state = genv.reset(env_config, int(rng.integers(2**63)))
    counts = np.zeros(task_set.num_tasks)
    cache = None if params is None else uvfa.head_cache(params, goal_vector)
    while not state.terminal:
        if params is None:
            action = int(rng.integers(genv.NUM_ACTIONS))
        else:
            idx, trailing = genv.observe_sparse(state, task_set)
            action, _ = act(uvfa.q_single_sparse(params, idx, trailing, cache),
                            epsilon, rng)
        _, reward_vec, terminal = genv.step(state, action, task_set)
        counts += reward_vec
        pursued = reward_vec.sum() if reward_index is None else reward_vec[reward_index]
        state.prev_reward = float(pursued)
    return counts
