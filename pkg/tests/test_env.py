"""Grid world contracts: placement, movement, collection, rewards, observations."""
import numpy as np
import pytest

from gridgoals.env import (CONDITIONAL_PICKUP, ConfigError, EnvConfig, INVENTORY_SLOTS,
                           NUM_ACTIONS, chain_reward_oracle, observation_dim, observe,
                           pseudo_rewards, reset, step)
from helpers import chain_task_set, place_world, single_object_task_set

UP, DOWN, LEFT, RIGHT = range(4)


def test_reset_places_everything_distinct():
    ts, env = single_object_task_set(num_types=16, episode_length=512)
    env = EnvConfig(grid_width=8, grid_height=8, object_counts=(1,) * 16,
                    episode_length=512)
    state = reset(env, seed=7)
    assert len(set(state.object_cells)) == 16
    assert state.agent_cell not in state.object_cells
    assert state.inventory == []
    assert state.step_count == 0


def test_reset_grid_too_small():
    env = EnvConfig(grid_width=2, grid_height=2, object_counts=(1,) * 16)
    with pytest.raises(ConfigError):
        reset(env, seed=0)


def test_reset_deterministic():
    env = EnvConfig(grid_width=8, grid_height=8, object_counts=(1,) * 16)
    a, b = reset(env, seed=7), reset(env, seed=7)
    assert a.object_cells == b.object_cells
    assert a.agent_cell == b.agent_cell
    assert a.object_types == b.object_types


def test_step_collects_key_with_chain_rewards():
    ts, env = chain_task_set(4)
    # key (type 0) directly right of the agent
    state = place_world(env, object_cells=[11, 20, 30, 40], object_types=[0, 1, 2, 3],
                        agent_cell=10)
    _, rewards, terminal = step(state, RIGHT, ts)
    assert rewards.tolist() == [1.0, 0.0, 0.0, 0.0]
    assert state.inventory == [0]
    assert not terminal
    assert 11 not in state.object_cells  # respawned elsewhere
    assert len(state.object_cells) == 4


def test_step_blocked_by_wall():
    ts, env = chain_task_set(4)
    state = place_world(env, object_cells=[20, 30, 40, 50], object_types=[0, 1, 2, 3],
                        agent_cell=0)
    _, rewards, _ = step(state, UP, ts)
    assert state.agent_cell == 0
    assert not rewards.any()


def test_step_empty_cell_no_reward():
    ts, env = chain_task_set(4)
    state = place_world(env, object_cells=[20, 30, 40, 50], object_types=[0, 1, 2, 3],
                        agent_cell=10)
    _, rewards, _ = step(state, RIGHT, ts)
    assert state.agent_cell == 11
    assert not rewards.any()
    assert state.inventory == []


def test_step_rejects_bad_action():
    ts, env = chain_task_set(4)
    state = place_world(env, object_cells=[20, 30, 40, 50], object_types=[0, 1, 2, 3],
                        agent_cell=10)
    with pytest.raises(ValueError):
        step(state, 4, ts)


def test_step_terminal_at_episode_end():
    ts, env = chain_task_set(4)
    env = EnvConfig(grid_width=8, grid_height=8, object_counts=(4,) * 4,
                    episode_length=1, chain_mode=True)
    state = reset(env, seed=3)
    _, _, terminal = step(state, UP, ts)
    assert terminal
    with pytest.raises(ValueError):
        step(state, UP, ts)


def test_inventory_eviction_keeps_five_most_recent():
    ts, env = chain_task_set(4)
    state = place_world(env, object_cells=[1], object_types=[0], agent_cell=0,
                        inventory=[1, 2, 3, 0, 1])
    step(state, RIGHT, ts)
    assert state.inventory == [0, 1, 2, 3, 0]
    assert len(state.inventory) == INVENTORY_SLOTS


def test_pseudo_rewards_chain_examples():
    ts, _ = chain_task_set(4)
    key, lock, door = 0, 1, 2
    assert pseudo_rewards([], key, ts).tolist() == [1, 0, 0, 0]
    assert pseudo_rewards([key], lock, ts).tolist() == [0, 1, 0, 0]
    assert pseudo_rewards([lock, key], door, ts).tolist() == [0, 0, 1, 0]
    assert pseudo_rewards([key], door, ts).tolist() == [0, 0, 0, 0]  # sequence broken


def test_pseudo_rewards_key_fires_regardless_of_stack():
    ts, _ = chain_task_set(4)
    for stack in ([], [2, 1], [0, 0, 0], [3, 2, 1, 0, 3]):
        assert pseudo_rewards(stack, 0, ts)[0] == 1.0


def test_pseudo_rewards_single_object_one_hot():
    ts, _ = single_object_task_set(num_types=16)
    vec = pseudo_rewards([], 5, ts)
    expected = np.zeros(16)
    expected[5] = 1.0
    assert vec.tolist() == expected.tolist()


def test_pseudo_rewards_matches_regex_oracle_spot_checks():
    ts, _ = chain_task_set(4)
    rng = np.random.default_rng(0)
    for _ in range(300):
        depth = int(rng.integers(0, INVENTORY_SLOTS + 1))
        stack = [int(rng.integers(4)) for _ in range(depth)]
        collected = int(rng.integers(4))
        got = pseudo_rewards(stack, collected, ts)
        stack_str = "".join(map(str, stack))
        want = [float(chain_reward_oracle(stack_str, collected, p)) for p in range(4)]
        assert got.tolist() == want


def test_observe_length_and_layout():
    ts, _ = chain_task_set(4)
    env = EnvConfig(grid_width=8, grid_height=8, object_counts=(4,) * 4,
                    episode_length=512, chain_mode=True)
    assert observation_dim(env, 4) == 8 * 8 * 5 + 20 + NUM_ACTIONS + 1 == 345
    state = reset(env, seed=1)
    obs = observe(state, ts)
    assert obs.shape == (345,)
    t, cells = 4, 64
    inventory_block = obs[cells * t + cells:cells * t + cells + INVENTORY_SLOTS * t]
    assert not inventory_block.any()  # empty inventory
    assert obs[cells * t + state.agent_cell] == 1.0


def test_observe_inventory_slots_after_two_collections():
    # walk onto a key then a lock and check the slot encoding is [lock, key, 0, 0, 0]
    ts, env = chain_task_set(4)
    state = place_world(env, object_cells=[11, 12, 30, 40], object_types=[0, 1, 2, 3],
                        agent_cell=10)
    state.object_cells[0] = 11
    step(state, RIGHT, ts)
    # the key respawned somewhere; force the lock to still be at 12
    state.object_cells[1] = 12
    if state.object_cells[0] == 12:
        state.object_cells[0] = 40  # keep cells distinct if respawn landed there
    step(state, RIGHT, ts)
    assert state.inventory == [1, 0]
    obs = observe(state, ts)
    t, cells = 4, 64
    base = cells * t + cells
    slot0 = obs[base:base + t]
    slot1 = obs[base + t:base + 2 * t]
    rest = obs[base + 2 * t:base + INVENTORY_SLOTS * t]
    assert slot0.tolist() == [0, 1, 0, 0]  # lock most recent
    assert slot1.tolist() == [1, 0, 0, 0]  # key below it
    assert not rest.any()


def test_observe_sparse_materializes_to_observe():
    from gridgoals.env import observe_sparse
    ts, env = chain_task_set(4)
    rng = np.random.default_rng(8)
    state = reset(env, seed=31)
    for _ in range(100):
        step(state, int(rng.integers(NUM_ACTIONS)), ts)
        state.prev_reward = float(rng.uniform(-2, 2))
        dense = observe(state, ts)
        idx, trailing = observe_sparse(state, ts)
        rebuilt = np.zeros_like(dense)
        rebuilt[idx] = 1.0
        rebuilt[-1] = trailing
        assert np.array_equal(dense, rebuilt)
        if state.terminal:
            state = reset(env, seed=32)


def test_observe_prev_reward_clipped():
    ts, env = chain_task_set(4)
    state = place_world(env, object_cells=[20, 30, 40, 50], object_types=[0, 1, 2, 3],
                        agent_cell=10)
    state.prev_reward = 3.5
    assert observe(state, ts)[-1] == 1.0
    state.prev_reward = -2.0
    assert observe(state, ts)[-1] == -1.0


def test_reward_locality_ignores_unrelated_state():
    # same (inventory, collected) gives the same vector no matter the rest of the world
    ts, env = chain_task_set(4)
    rng = np.random.default_rng(1)
    for _ in range(50):
        stack = [int(rng.integers(4)) for _ in range(int(rng.integers(0, 6)))]
        collected = int(rng.integers(4))
        base = pseudo_rewards(stack, collected, ts)
        again = pseudo_rewards(list(stack), collected, ts)
        assert base.tolist() == again.tolist()


def test_step_reward_equals_standalone_pseudo_rewards():
    ts, env = chain_task_set(4)
    rng = np.random.default_rng(5)
    state = reset(env, seed=11)
    for _ in range(300):
        inventory_before = list(state.inventory)
        action = int(rng.integers(NUM_ACTIONS))
        prev_cells = dict(zip(state.object_cells, state.object_types))
        _, rewards, terminal = step(state, action, ts)
        if state.inventory != inventory_before:
            collected = state.inventory[0]
            assert state.agent_cell in prev_cells and prev_cells[state.agent_cell] == collected
            expected = pseudo_rewards(inventory_before, collected, ts)
            assert rewards.tolist() == expected.tolist()
        else:
            assert not rewards.any()
        if terminal:
            state = reset(env, seed=12)


def test_episode_trace_is_pure_function_of_seed_and_actions():
    ts, env = chain_task_set(3)
    rng = np.random.default_rng(2)
    actions = [int(a) for a in rng.integers(0, NUM_ACTIONS, size=200)]

    def trace(seed):
        state = reset(env, seed)
        out = []
        for a in actions:
            _, r, term = step(state, a, ts)
            out.append((state.agent_cell, tuple(state.object_cells),
                        tuple(state.inventory), tuple(r)))
            if term:
                break
        return out

    assert trace(99) == trace(99)


def test_object_count_conserved_and_cells_distinct():
    ts, env = chain_task_set(4)
    state = reset(env, seed=21)
    rng = np.random.default_rng(3)
    for _ in range(500):
        step(state, int(rng.integers(NUM_ACTIONS)), ts)
        assert len(state.object_cells) == 16
        assert len(set(state.object_cells)) == 16
        if state.terminal:
            state = reset(env, seed=22)


def test_chain_counts_ordered_within_episode():
    # cumulative reward counts can never invert along the chain
    ts, env = chain_task_set(4)
    rng = np.random.default_rng(4)
    for seed in range(3):
        state = reset(env, seed)
        counts = np.zeros(4)
        while not state.terminal:
            _, r, _ = step(state, int(rng.integers(NUM_ACTIONS)), ts)
            counts += r
            assert counts[0] >= counts[1] >= counts[2] >= counts[3]


def test_conditional_pickup_blocks_out_of_order_objects():
    ts, env = chain_task_set(4)
    env_cond = EnvConfig(grid_width=8, grid_height=8, object_counts=(4,) * 4,
                         episode_length=512, collect_mode=CONDITIONAL_PICKUP,
                         chain_mode=True)
    # walking into a door with an empty stack: no pickup, agent still moves
    state = place_world(env_cond, object_cells=[11, 20, 30, 40],
                        object_types=[2, 1, 0, 3], agent_cell=10)
    _, rewards, _ = step(state, RIGHT, ts)
    assert state.agent_cell == 11
    assert state.inventory == []
    assert not rewards.any()
    assert 11 in state.object_cells  # door stayed put
    # a key is always collectible
    state = place_world(env_cond, object_cells=[11, 20, 30, 40],
                        object_types=[0, 1, 2, 3], agent_cell=10)
    _, rewards, _ = step(state, RIGHT, ts)
    assert state.inventory == [0]
    assert rewards[0] == 1.0
    # with [lock, key] stacked, the door becomes collectible
    state = place_world(env_cond, object_cells=[11, 20, 30, 40],
                        object_types=[2, 1, 0, 3], agent_cell=10,
                        inventory=[1, 0])
    _, rewards, _ = step(state, RIGHT, ts)
    assert state.inventory == [2, 1, 0]
    assert rewards[2] == 1.0
