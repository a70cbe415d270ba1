"""Shared builders for tests: tiny task sets, hand-placed world states and
synthetic trajectories."""
import numpy as np

from gridgoals.env import EnvConfig, ObjectType, TaskSet, TaskSpec, WorldState
from gridgoals.learner import Trajectory
from gridgoals.presets import build_task_set


def chain_task_set(length=4):
    ts, _, env, _ = build_task_set(f"chain{length}")
    return ts, env


def single_object_task_set(num_types=4, num_train=None, copies=1, episode_length=64):
    objects = tuple(ObjectType(id=i, color=i % 4, shape=i // 4, name=f"obj{i}")
                    for i in range(num_types))
    tasks = tuple(TaskSpec("single-object", i, f"obj{i}") for i in range(num_types))
    k = num_train if num_train is not None else num_types
    ts = TaskSet(objects=objects, tasks=tasks, num_train=k,
                 goal_matrix=np.eye(num_types), learnable=np.ones(num_types, dtype=bool))
    env = EnvConfig(grid_width=6, grid_height=6, object_counts=(copies,) * num_types,
                    episode_length=episode_length)
    return ts, env


def place_world(env, object_cells, object_types, agent_cell, inventory=(), seed=0):
    """A WorldState with everything pinned by hand."""
    return WorldState(config=env, object_types=list(object_types),
                      object_cells=list(object_cells), agent_cell=agent_cell,
                      inventory=list(inventory), step_count=0, prev_action=-1,
                      prev_reward=0.0, rng=np.random.default_rng(seed))


def random_trajectory(rng, h=8, k=3, obs_dim=10, num_actions=4, eps_p=0.2, term_p=0.15):
    """Synthetic trajectory with arbitrary contents for learner-level tests."""
    return Trajectory(
        observations=rng.normal(size=(h + 1, obs_dim)),
        actions=rng.integers(0, num_actions, size=h),
        reward_vectors=rng.integers(0, 2, size=(h, k)).astype(float),
        epsilon_flags=rng.random(h) < eps_p,
        terminal_flags=rng.random(h) < term_p,
        behavior_goals=rng.integers(0, k, size=h),
    )


def synthetic_task_set(k=3, d=None, num_train=None, learnable=None):
    """Task set whose goal rows are one-hot; object catalog is irrelevant."""
    d = d or k
    objects = tuple(ObjectType(id=i, color=0, shape=0, name=f"o{i}") for i in range(1))
    tasks = tuple(TaskSpec("single-object", 0, f"t{i}") for i in range(k))
    mask = np.ones(k, dtype=bool) if learnable is None else np.asarray(learnable)
    return TaskSet(objects=objects, tasks=tasks,
                   num_train=num_train if num_train is not None else k,
                   goal_matrix=np.eye(k, d), learnable=mask)
