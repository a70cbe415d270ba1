"""Experiment presets: object catalogs, task sets, goal encodings, config files.

Eight presets cover multi-task collection (7 and 16 object types), the three
transfer variants (off-policy goals, zero-shot with structured goal vectors,
and the abstract-task augmentation) and dependency chains of depth 3 to 5.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .env import (ALWAYS_COLLECT, CHAIN_ROLE_NAMES, CONDITIONAL_PICKUP, ConfigError,
                  EnvConfig, ObjectType, TaskSet, TaskSpec, validate_task_set)
from .learner import LearnerConfig

COLORS = ("red", "green", "blue", "cyan")
SHAPES = ("cube", "ball", "cone", "ring")

PRESET_NAMES = ("multitask7", "multitask16", "transfer-offpolicy", "transfer-zeroshot",
                "transfer-augmented", "chain3", "chain4", "chain5")

HOLDOUT_COLOR = 3  # the cyan column is learned purely off-policy
HOLDOUT_SHAPE = 3  # default zero-shot hold-out: every color of this shape


@dataclass(frozen=True, eq=False)
class GoalEncoding:
    scheme: str  # one-hot-K | two-hot-color-shape | augmented
    matrix: np.ndarray  # (K, d)


@dataclass(frozen=True, eq=False)
class ExperimentPreset:
    name: str
    env: EnvConfig
    task_set: TaskSet
    encoding: GoalEncoding
    default_frames: int
    holdout_note: str = ""


def color_shape_catalog(num_types: int = 16) -> tuple[ObjectType, ...]:
    """Object types enumerated color-major over 4 colors x 4 shapes."""
    objs = []
    for c in range(len(COLORS)):
        for s in range(len(SHAPES)):
            if len(objs) == num_types:
                return tuple(objs)
            objs.append(ObjectType(id=len(objs), color=c, shape=s,
                                   name=f"{COLORS[c]}_{SHAPES[s]}"))
    return tuple(objs)


def chain_catalog(length: int) -> tuple[ObjectType, ...]:
    if not 1 <= length <= len(CHAIN_ROLE_NAMES):
        raise ConfigError(f"chain length must be 1..{len(CHAIN_ROLE_NAMES)}")
    return tuple(ObjectType(id=i, role=i, name=CHAIN_ROLE_NAMES[i]) for i in range(length))


def _one_hot(k: int) -> np.ndarray:
    return np.eye(k)


def _two_hot_row(obj: ObjectType) -> np.ndarray:
    row = np.zeros(len(COLORS) + len(SHAPES))
    row[obj.color] = 1.0
    row[len(COLORS) + obj.shape] = 1.0
    return row


def _resolve_holdout(catalog, holdout) -> list[int]:
    """Object ids held out of training for the zero-shot experiments.

    "shape3" (default) removes every color of the last shape; "diagonal"
    removes one object per color on distinct shapes; a list of object ids or
    names picks the cells directly.
    """
    if holdout in (None, "default", "shape3"):
        return [o.id for o in catalog if o.shape == HOLDOUT_SHAPE]
    if holdout == "diagonal":
        return [o.id for o in catalog if o.shape == o.color]
    names = {o.name: o.id for o in catalog}
    ids = []
    for item in holdout:
        if isinstance(item, str):
            if item not in names:
                raise ConfigError(f"unknown hold-out object {item!r}")
            ids.append(names[item])
        else:
            ids.append(int(item))
    if len(ids) != 4:
        raise ConfigError(f"hold-out split needs exactly 4 objects, got {len(ids)}")
    return ids


def _grid_env(num_objects_per_type: int, num_types: int, episode_length: int,
              chain_mode: bool = False, collect_mode: str = ALWAYS_COLLECT) -> EnvConfig:
    return EnvConfig(grid_width=8, grid_height=8,
                     object_counts=(num_objects_per_type,) * num_types,
                     episode_length=episode_length, collect_mode=collect_mode,
                     chain_mode=chain_mode)


def build_task_set(name: str, holdout=None):
    """Task set and goal encoding for one preset; returns (TaskSet, GoalEncoding, EnvConfig, note)."""
    if name in ("multitask7", "multitask16"):
        n = 7 if name == "multitask7" else 16
        catalog = color_shape_catalog(n)
        tasks = tuple(TaskSpec("single-object", o.id, o.name) for o in catalog)
        enc = GoalEncoding("one-hot-K", _one_hot(n))
        ts = TaskSet(objects=catalog, tasks=tasks, num_train=n, goal_matrix=enc.matrix,
                     learnable=np.ones(n, dtype=bool))
        return ts, enc, _grid_env(1, n, 512), ""

    if name == "transfer-offpolicy":
        catalog = color_shape_catalog(16)
        train = [o for o in catalog if o.color != HOLDOUT_COLOR]
        held = [o for o in catalog if o.color == HOLDOUT_COLOR]
        ordered = train + held
        tasks = tuple(TaskSpec("single-object", o.id, o.name) for o in ordered)
        enc = GoalEncoding("one-hot-K", _one_hot(16))
        # hold-out goals stay learnable: they are trained purely off-policy
        ts = TaskSet(objects=catalog, tasks=tasks, num_train=len(train),
                     goal_matrix=enc.matrix, learnable=np.ones(16, dtype=bool))
        note = f"behavior goals exclude the {COLORS[HOLDOUT_COLOR]} objects (learned off-policy)"
        return ts, enc, _grid_env(1, 16, 512), note

    if name in ("transfer-zeroshot", "transfer-augmented"):
        catalog = color_shape_catalog(16)
        held_ids = _resolve_holdout(catalog, holdout)
        train = [o for o in catalog if o.id not in held_ids]
        held = [o for o in catalog if o.id in held_ids]
        tasks = [TaskSpec("single-object", o.id, o.name) for o in train]
        rows = [_two_hot_row(o) for o in train]
        scheme = "two-hot-color-shape"
        if name == "transfer-augmented":
            scheme = "augmented"
            for c, cname in enumerate(COLORS):
                tasks.append(TaskSpec("abstract-color", c, f"any_{cname}"))
                row = np.zeros(8)
                row[c] = 1.0
                rows.append(row)
            for s, sname in enumerate(SHAPES):
                tasks.append(TaskSpec("abstract-shape", s, f"any_{sname}"))
                row = np.zeros(8)
                row[len(COLORS) + s] = 1.0
                rows.append(row)
        num_train = len(tasks)
        tasks += [TaskSpec("single-object", o.id, o.name) for o in held]
        rows += [_two_hot_row(o) for o in held]
        learnable = np.arange(len(tasks)) < num_train
        enc = GoalEncoding(scheme, np.stack(rows))
        ts = TaskSet(objects=catalog, tasks=tuple(tasks), num_train=num_train,
                     goal_matrix=enc.matrix, learnable=learnable)
        held_names = ", ".join(o.name for o in held)
        default = holdout in (None, "default", "shape3")
        note = (f"hold-out cells: {held_names} "
                f"({'default shape-based split' if default else 'overridden split'})")
        return ts, enc, _grid_env(1, 16, 512), note

    if name.startswith("chain"):
        try:
            length = int(name.removeprefix("chain"))
        except ValueError:
            raise ConfigError(f"unknown preset {name!r}; valid: {', '.join(PRESET_NAMES)}") from None
        catalog = chain_catalog(length)
        tasks = tuple(TaskSpec("chain-step", i, catalog[i].name) for i in range(length))
        enc = GoalEncoding("one-hot-K", _one_hot(length))
        ts = TaskSet(objects=catalog, tasks=tasks, num_train=length,
                     goal_matrix=enc.matrix, learnable=np.ones(length, dtype=bool))
        return ts, enc, _grid_env(4, length, 1024, chain_mode=True), ""

    raise ConfigError(f"unknown preset {name!r}; valid: {', '.join(PRESET_NAMES)}")


_PRESET_FRAMES = {
    "multitask7": 3_000_000,
    "multitask16": 6_000_000,
    "transfer-offpolicy": 4_000_000,
    "transfer-zeroshot": 3_000_000,
    "transfer-augmented": 3_000_000,
    "chain3": 4_000_000,
    "chain4": 6_000_000,
    "chain5": 8_000_000,
}


def make_preset(name: str, holdout=None) -> ExperimentPreset:
    if name not in PRESET_NAMES:
        raise ConfigError(f"unknown preset {name!r}; valid: {', '.join(PRESET_NAMES)}")
    ts, enc, env, note = build_task_set(name, holdout)
    validate_task_set(ts)
    return ExperimentPreset(name=name, env=env, task_set=ts, encoding=enc,
                            default_frames=_PRESET_FRAMES[name], holdout_note=note)


# -- configuration files ------------------------------------------------------

_CONFIG_SCHEMA = {
    "preset": None,
    "seed": 0,
    "frames": None,  # preset default when unset
    "actors": 8,
    "agent": "unicorn",
    "holdout": "shape3",
    "env": {
        "grid_width": None, "grid_height": None, "episode_length": None,
        "objects_per_type": None, "collect_mode": None,
    },
    "learner": {
        "discount": 0.95, "unroll": 20, "batch_size": 32,
        "learning_rate": 2e-4, "rms_decay": 0.99, "rms_epsilon": 0.01,
    },
    "actor": {
        "epsilon_start": 1.0, "epsilon_end": 0.01, "epsilon_anneal_frames": 1_000_000,
    },
    "harness": {
        "queue_capacity": 0, "eval_every_frames": 250_000, "eval_episodes_per_goal": 4,
        "repr_dim": 128, "hidden_dim": 256, "threaded": None,
    },
}


def _merge_checked(defaults: dict, raw: dict, prefix: str = "") -> dict:
    out = dict(defaults)
    for key, value in raw.items():
        path = f"{prefix}{key}"
        if key not in defaults:
            raise ConfigError(f"unknown config key {path!r}")
        if isinstance(defaults[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {path!r} must be a table")
            out[key] = _merge_checked(defaults[key], value, prefix=f"{path}.")
        else:
            out[key] = value
    return out


def load_config(path, overrides: dict | None = None) -> dict:
    """Read a JSON config file, apply defaults, reject unknown keys.

    An empty or missing file means all defaults; `overrides` (typically from
    the command line) win over the file. Returns the normalized dict.
    """
    raw = {}
    if path is not None:
        text = Path(path).read_text().strip()
        if text:
            try:
                raw = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"config file {path} must contain a JSON object")
    resolved = _merge_checked(_CONFIG_SCHEMA, raw)
    for key, value in (overrides or {}).items():
        if "." in key:
            section, sub = key.split(".", 1)
            if section not in resolved or not isinstance(resolved[section], dict):
                raise ConfigError(f"unknown config key {key!r}")
            if sub not in resolved[section]:
                raise ConfigError(f"unknown config key {key!r}")
            resolved[section][sub] = value
        else:
            if key not in resolved:
                raise ConfigError(f"unknown config key {key!r}")
            resolved[key] = value
    return normalize_config(resolved)


def normalize_config(config: dict) -> dict:
    """Canonical form: defaults filled, preset-dependent values resolved, validated."""
    cfg = _merge_checked(_CONFIG_SCHEMA, config)
    if cfg["preset"] is None:
        raise ConfigError("a preset must be named (config key 'preset' or --preset)")
    preset = make_preset(cfg["preset"], cfg["holdout"])
    env = preset.env
    e = cfg["env"]
    if e["grid_width"] is None:
        e["grid_width"] = env.grid_width
    if e["grid_height"] is None:
        e["grid_height"] = env.grid_height
    if e["episode_length"] is None:
        e["episode_length"] = env.episode_length
    if e["objects_per_type"] is None:
        e["objects_per_type"] = env.object_counts[0]
    if e["collect_mode"] is None:
        e["collect_mode"] = env.collect_mode
    if cfg["frames"] is None:
        cfg["frames"] = preset.default_frames
    _validate_resolved(cfg)
    return cfg


def _validate_resolved(cfg: dict) -> None:
    checks = [
        (cfg["seed"] >= 0, "seed"),
        (cfg["frames"] > 0, "frames"),
        (cfg["actors"] >= 1, "actors"),
        (cfg["env"]["episode_length"] > 0, "env.episode_length"),
        (cfg["env"]["objects_per_type"] > 0, "env.objects_per_type"),
        (cfg["env"]["collect_mode"] in (ALWAYS_COLLECT, CONDITIONAL_PICKUP), "env.collect_mode"),
        (0 <= cfg["learner"]["discount"] < 1, "learner.discount"),
        (cfg["learner"]["unroll"] >= 1, "learner.unroll"),
        (cfg["learner"]["batch_size"] >= 1, "learner.batch_size"),
        (cfg["learner"]["learning_rate"] > 0, "learner.learning_rate"),
        (0 <= cfg["actor"]["epsilon_end"] <= cfg["actor"]["epsilon_start"] <= 1,
         "actor.epsilon_start/epsilon_end"),
        (cfg["harness"]["eval_episodes_per_goal"] >= 1, "harness.eval_episodes_per_goal"),
    ]
    for ok, name in checks:
        if not ok:
            raise ConfigError(f"config key {name!r} violates its invariant")
    kind = cfg["agent"]
    if kind not in ("unicorn", "glutton", "random") and not kind.startswith("expert:"):
        raise ConfigError("config key 'agent' must be unicorn, glutton, random or expert:<task>")


def serialize_config(cfg: dict) -> str:
    return json.dumps(cfg, indent=2, sort_keys=True) + "\n"


def to_run_config(cfg: dict):
    """Instantiate the preset and harness configuration from a normalized dict."""
    from .harness import RunConfig  # local import to keep module layering flat

    preset = make_preset(cfg["preset"], cfg["holdout"])
    e = cfg["env"]
    env = EnvConfig(
        grid_width=e["grid_width"], grid_height=e["grid_height"],
        object_counts=(e["objects_per_type"],) * preset.task_set.num_types,
        episode_length=e["episode_length"], collect_mode=e["collect_mode"],
        chain_mode=preset.env.chain_mode,
    )
    ln = cfg["learner"]
    learner = LearnerConfig(discount=ln["discount"], unroll=ln["unroll"],
                            batch_size=ln["batch_size"], learning_rate=ln["learning_rate"],
                            rms_decay=ln["rms_decay"], rms_epsilon=ln["rms_epsilon"])
    h = cfg["harness"]
    run_config = RunConfig(
        env=env, task_set=preset.task_set, agent=cfg["agent"],
        num_actors=cfg["actors"], total_env_frames=cfg["frames"],
        queue_capacity=h["queue_capacity"], eval_every_frames=h["eval_every_frames"],
        eval_episodes_per_goal=h["eval_episodes_per_goal"], seed=cfg["seed"],
        learner=learner, epsilon_start=cfg["actor"]["epsilon_start"],
        epsilon_end=cfg["actor"]["epsilon_end"],
        epsilon_anneal_frames=cfg["actor"]["epsilon_anneal_frames"],
        repr_dim=h["repr_dim"], hidden_dim=h["hidden_dim"], threaded=h["threaded"],
    )
    return run_config, preset
