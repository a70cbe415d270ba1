"""Grid world with respawning collectibles, an inventory stack, and per-task rewards.

The world is a single walled room on a W x H grid. Objects are collected by
walking into them and respawn at a random free cell, so episodes only end on
the step clock. Every transition exposes the full vector of task rewards,
one component per task, regardless of which goal the agent is pursuing.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

ACTIONS = ("up", "down", "left", "right")
NUM_ACTIONS = len(ACTIONS)
# dx, dy per action; y grows downward
_DELTAS = ((0, -1), (0, 1), (-1, 0), (1, 0))

INVENTORY_SLOTS = 5

ALWAYS_COLLECT = "always-collect"
CONDITIONAL_PICKUP = "conditional-pickup"

CHAIN_ROLE_NAMES = ("key", "lock", "door", "chest", "cake")


class ConfigError(ValueError):
    """Raised when an environment or task configuration is unsatisfiable."""


@dataclass(frozen=True)
class ObjectType:
    """One kind of collectible. Either color+shape or a chain role is set, never both."""

    id: int
    color: int | None = None
    shape: int | None = None
    role: int | None = None
    name: str = ""


@dataclass(frozen=True)
class TaskSpec:
    """A pseudo-reward rule. `target` is an object id, color id, shape id or
    chain position depending on `kind`."""

    kind: str  # single-object | abstract-color | abstract-shape | chain-step | glutton-sum
    target: int
    name: str = ""


TASK_KINDS = ("single-object", "abstract-color", "abstract-shape", "chain-step", "glutton-sum")


@dataclass(frozen=True, eq=False)
class TaskSet:
    """Object catalog, K task definitions, the behavior/learnable split and goal vectors.

    Tasks are ordered with the `num_train` behavior goals first; indices at or
    past `num_train` are hold-out goals (evaluation only). `learnable` marks
    the goals that contribute to the training loss, which is the first
    `num_train` goals unless an experiment learns hold-out goals off-policy.
    """

    objects: tuple[ObjectType, ...]
    tasks: tuple[TaskSpec, ...]
    num_train: int
    goal_matrix: np.ndarray  # (K, d) float64
    learnable: np.ndarray  # (K,) bool

    @property
    def num_tasks(self) -> int:
        return len(self.tasks)

    @property
    def num_types(self) -> int:
        return len(self.objects)

    @property
    def goal_dim(self) -> int:
        return self.goal_matrix.shape[1]

    @property
    def holdout_indices(self) -> list[int]:
        return list(range(self.num_train, len(self.tasks)))

    @property
    def task_names(self) -> tuple[str, ...]:
        return tuple(t.name for t in self.tasks)

    @property
    def chain_length(self) -> int:
        roles = [o.role for o in self.objects if o.role is not None]
        return max(roles) + 1 if roles else 0


def validate_task_set(ts: TaskSet, allow_glutton: bool = False) -> None:
    """Check catalog and task invariants; raises ConfigError with the offending item."""
    ids = [o.id for o in ts.objects]
    if ids != list(range(len(ids))):
        raise ConfigError(f"object ids must be dense 0..{len(ids) - 1}, got {ids}")
    for o in ts.objects:
        has_cs = o.color is not None and o.shape is not None
        has_role = o.role is not None
        if has_cs == has_role:
            raise ConfigError(f"object {o.id} must set exactly one of color+shape or role")
    chain_len = ts.chain_length
    for t in ts.tasks:
        if t.kind not in TASK_KINDS:
            raise ConfigError(f"unknown task kind {t.kind!r}")
        if t.kind == "chain-step" and not 0 <= t.target < chain_len:
            raise ConfigError(f"chain-step task {t.name!r} targets position {t.target} "
                              f"outside chain of length {chain_len}")
        if t.kind == "glutton-sum" and not allow_glutton:
            raise ConfigError("glutton-sum tasks are synthesized by the harness, not declared")
    if not 1 <= ts.num_train <= len(ts.tasks):
        raise ConfigError(f"num_train={ts.num_train} out of range for {len(ts.tasks)} tasks")
    if ts.goal_matrix.shape[0] != len(ts.tasks):
        raise ConfigError("goal matrix must have one row per task")
    if ts.learnable.shape != (len(ts.tasks),):
        raise ConfigError("learnable mask must have one entry per task")


@dataclass(frozen=True)
class EnvConfig:
    """World layout and episode rules. Respawn is always on."""

    grid_width: int = 8
    grid_height: int = 8
    object_counts: tuple[int, ...] = ()  # copies per object type id
    episode_length: int = 512
    collect_mode: str = ALWAYS_COLLECT
    chain_mode: bool = False

    @property
    def num_objects(self) -> int:
        return int(sum(self.object_counts))

    @property
    def num_cells(self) -> int:
        return self.grid_width * self.grid_height


@dataclass
class WorldState:
    """Mutable episode state. `step` advances it in place and returns it."""

    config: EnvConfig
    object_types: list[int]  # type id per object instance
    object_cells: list[int]  # flattened cell index per object instance
    agent_cell: int
    inventory: list[int]  # type ids, most recent first, at most 5
    step_count: int
    prev_action: int  # -1 before the first action of an episode
    prev_reward: float  # behavior goal's reward on the previous step (set by the actor)
    rng: np.random.Generator = field(repr=False, default=None)

    @property
    def grid_width(self) -> int:
        return self.config.grid_width

    @property
    def grid_height(self) -> int:
        return self.config.grid_height

    @property
    def agent_pos(self) -> tuple[int, int]:
        return self.agent_cell % self.grid_width, self.agent_cell // self.grid_width

    @property
    def terminal(self) -> bool:
        return self.step_count >= self.config.episode_length


def reset(config: EnvConfig, seed: int) -> WorldState:
    """Start a fresh episode: agent and all objects at distinct uniform cells.

    Identical (config, seed) pairs produce bit-identical states.
    """
    if config.episode_length <= 0:
        raise ConfigError("episode_length must be positive")
    if any(c <= 0 for c in config.object_counts) or not config.object_counts:
        raise ConfigError("every declared object type needs a positive count")
    n = config.num_objects
    if config.num_cells < n + 1:
        raise ConfigError(f"grid of {config.num_cells} cells cannot hold "
                          f"{n} objects plus the agent")
    rng = np.random.default_rng(seed)
    cells = rng.choice(config.num_cells, size=n + 1, replace=False)
    types = [tid for tid, count in enumerate(config.object_counts) for _ in range(count)]
    return WorldState(
        config=config,
        object_types=types,
        object_cells=[int(c) for c in cells[1:]],
        agent_cell=int(cells[0]),
        inventory=[],
        step_count=0,
        prev_action=-1,
        prev_reward=0.0,
        rng=rng,
    )


def _chain_prefix_ok(inventory_roles: list[int | None], position: int) -> bool:
    """True when the most recent `position` entries are roles p-1, p-2, ..., 0."""
    if len(inventory_roles) < position:
        return False
    return all(inventory_roles[k] == position - 1 - k for k in range(position))


def _collectible(state: WorldState, obj: ObjectType, catalog: tuple[ObjectType, ...]) -> bool:
    if state.config.collect_mode == ALWAYS_COLLECT:
        return True
    if obj.role is None or obj.role == 0:
        return True
    roles = [catalog[i].role for i in state.inventory]
    return _chain_prefix_ok(roles, obj.role)


def pseudo_rewards(inventory_before: list[int], collected: int, task_set: TaskSet) -> np.ndarray:
    """Reward vector for a single collection event, one component per task.

    Chain-step tasks at position p pay only when the p most recent inventory
    entries are exactly the roles p-1 down to 0; any other stack prefix means
    the sequence must be rebuilt from the start. Glutton-sum components equal
    the sum of all other components.
    """
    catalog = task_set.objects
    obj = catalog[collected]
    inv_roles = [catalog[i].role for i in inventory_before]
    out = np.zeros(task_set.num_tasks)
    for k, task in enumerate(task_set.tasks):
        if task.kind == "single-object":
            out[k] = 1.0 if collected == task.target else 0.0
        elif task.kind == "abstract-color":
            out[k] = 1.0 if obj.color == task.target else 0.0
        elif task.kind == "abstract-shape":
            out[k] = 1.0 if obj.shape == task.target else 0.0
        elif task.kind == "chain-step":
            hit = obj.role == task.target and _chain_prefix_ok(inv_roles, task.target)
            out[k] = 1.0 if hit else 0.0
    for k, task in enumerate(task_set.tasks):
        if task.kind == "glutton-sum":
            out[k] = out.sum() - out[k]
    return out


def step(state: WorldState, action: int, task_set: TaskSet):
    """Advance one transition in place; returns (state, reward_vector, terminal).

    Moves one cell (walls block), collects the destination object if the
    collect mode permits, pushes it onto the inventory evicting the oldest
    entry past five, and respawns it at a uniform free cell. The object count
    on the grid is invariant. `prev_reward` is left at 0; the actor overwrites
    it with its behavior goal's component.
    """
    if not 0 <= action < NUM_ACTIONS:
        raise ValueError(f"action must be in [0, {NUM_ACTIONS}), got {action}")
    if state.terminal:
        raise ValueError("step() called on a terminal state")

    w, h = state.grid_width, state.grid_height
    x, y = state.agent_cell % w, state.agent_cell // w
    dx, dy = _DELTAS[action]
    nx, ny = x + dx, y + dy
    if 0 <= nx < w and 0 <= ny < h:
        dest = ny * w + nx
    else:
        dest = state.agent_cell  # blocked by the room wall

    rewards = np.zeros(task_set.num_tasks)
    moved_onto = dest != state.agent_cell
    state.agent_cell = dest
    if moved_onto and dest in state.object_cells:
        slot = state.object_cells.index(dest)
        type_id = state.object_types[slot]
        if _collectible(state, task_set.objects[type_id], task_set.objects):
            rewards = pseudo_rewards(state.inventory, type_id, task_set)
            state.inventory.insert(0, type_id)
            del state.inventory[INVENTORY_SLOTS:]
            occupied = set(state.object_cells) | {state.agent_cell}
            free = [c for c in range(state.config.num_cells) if c not in occupied]
            state.object_cells[slot] = free[int(state.rng.integers(len(free)))]

    state.step_count += 1
    state.prev_action = action
    state.prev_reward = 0.0
    return state, rewards, state.terminal


def observation_dim(config: EnvConfig, num_types: int) -> int:
    """W*H*(T+1) grid/agent one-hots + 5T inventory + |A| previous action + 1 reward."""
    return (config.num_cells * (num_types + 1)
            + INVENTORY_SLOTS * num_types + NUM_ACTIONS + 1)


def observe_sparse(state: WorldState, task_set: TaskSet) -> tuple[np.ndarray, float]:
    """The observation as (indices of the one-hot entries, trailing reward scalar).

    Everything in the observation except the final previous-reward component
    is a 0/1 one-hot; this compact form lets the value network skip the dense
    multiply. `observe` materializes it.
    """
    t = task_set.num_types
    cells = state.config.num_cells
    idx = [cell * t + type_id
           for type_id, cell in zip(state.object_types, state.object_cells)]
    base = cells * t
    idx.append(base + state.agent_cell)
    base += cells
    idx.extend(base + slot * t + type_id
               for slot, type_id in enumerate(state.inventory))
    base += INVENTORY_SLOTS * t
    if state.prev_action >= 0:
        idx.append(base + state.prev_action)
    reward = min(1.0, max(-1.0, state.prev_reward))
    return np.array(idx, dtype=np.intp), reward


def observe(state: WorldState, task_set: TaskSet) -> np.ndarray:
    """Fixed-length symbolic observation vector.

    Layout: per-cell object-type one-hots (W*H*T, cell-major), agent cell
    one-hot (W*H), inventory slot one-hots (5*T, most recent first, empty
    slots zero), previous action one-hot (|A|), previous reward clipped to
    [-1, 1] (1 scalar).
    """
    indices, reward = observe_sparse(state, task_set)
    out = np.zeros(observation_dim(state.config, task_set.num_types))
    out[indices] = 1.0
    out[-1] = reward
    return out


def chain_reward_oracle(inventory_roles: str, collected_role: int, position: int) -> bool:
    """Regex oracle for the chain rule, operating on the stack as a digit string.

    The stack is written most recent first, e.g. "102" means a lock on top of
    a key on top of a door. Task `position` pays iff the collected role is
    `position` and the string starts with the exact descending run down to 0.
    """
    if collected_role != position:
        return False
    prefix = "".join(str(r) for r in range(position - 1, -1, -1))
    return re.match(prefix, inventory_roles) is not None
