"""Command line front end: run experiment presets, evaluate checkpoints, and
exercise the target-recursion oracle suite.

`run` writes a self-contained run directory (config snapshot, metrics CSV,
checkpoints, text summary) named by preset, seed and timestamp.
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import harness, learner, presets, uvfa
from .env import ConfigError


def run_experiment(cfg: dict, out_root: str | Path = "runs") -> Path:
    """Train one configuration and write all artifacts under a fresh run directory."""
    run_config, preset = presets.to_run_config(cfg)
    stamp = time.strftime("%Y%m%d-%H%M%S")
    run_dir = Path(out_root) / f"{preset.name}-s{cfg['seed']}-{stamp}"
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.json").write_text(presets.serialize_config(cfg))
    result = harness.run(run_config, out_dir=run_dir)
    (run_dir / "summary.txt").write_text(make_summary(cfg, preset, result))
    return run_dir


def make_summary(cfg: dict, preset: presets.ExperimentPreset,
                 result: harness.RunResult) -> str:
    """Final per-goal decomposition table plus per-eval-point curve data."""
    base = preset.task_set
    lines = [
        f"experiment: {preset.name}   agent: {cfg['agent']}   seed: {cfg['seed']}",
        f"frames: {result.report.frames}   train steps: {result.report.train_steps}",
    ]
    if preset.holdout_note:
        lines.append(f"split: {preset.holdout_note}")
    lines.append("")
    lines.append("final evaluation (mean reward counts per episode):")
    name_width = max(len(n) for n in base.task_names + ("goal",)) + 2
    header = "goal".ljust(name_width) + "pursued".rjust(9)
    header += "".join(n.rjust(max(9, len(n) + 1)) for n in base.task_names)
    lines.append(header)
    last_frames = result.rows[-1].frames if result.rows else 0
    for row in result.rows:
        if row.frames != last_frames:
            continue
        label = base.task_names[row.goal_id] if 0 <= row.goal_id < base.num_tasks else cfg["agent"]
        cells = label.ljust(name_width) + f"{row.mean_reward:9.3f}"
        cells += "".join(f"{v:{max(9, len(n) + 1)}.3f}"
                         for v, n in zip(row.decomposition, base.task_names))
        lines.append(cells)
    lines.append("")
    lines.append("curves (per evaluation point):")
    lines.append("frames,train_goal_mean,holdout_goal_mean,loss,truncation_rate")
    holdout = set(base.holdout_indices)
    by_frames: dict[int, list[harness.MetricsRow]] = {}
    for row in result.rows:
        by_frames.setdefault(row.frames, []).append(row)
    for frames in sorted(by_frames):
        rows = by_frames[frames]
        train_vals = [r.mean_reward for r in rows if r.goal_id >= 0 and r.goal_id not in holdout]
        held_vals = [r.mean_reward for r in rows if r.goal_id in holdout]
        train_mean = np.mean(train_vals) if train_vals else float("nan")
        held_mean = np.mean(held_vals) if held_vals else float("nan")
        lines.append(f"{frames},{train_mean:.4f},{held_mean:.4f},"
                     f"{rows[0].loss:.6g},{rows[0].truncation_rate:.4f}")
    return "\n".join(lines) + "\n"


def oracle_target_suite(seed: int, cases: int = 1000, max_unroll: int = 20,
                        max_goals: int = 8, max_actions: int = 4) -> int:
    """Compare the vectorized target recursion against the naive recursive
    definition on random instances; returns the number of mismatches."""
    rng = np.random.default_rng(seed)
    mismatches = 0
    for _ in range(cases):
        h = int(rng.integers(1, max_unroll + 1))
        k = int(rng.integers(1, max_goals + 1))
        a = int(rng.integers(2, max_actions + 1))
        gamma = float(rng.uniform(0.0, 0.99))
        q = rng.normal(size=(k, h + 1, a))
        rewards = rng.integers(0, 2, size=(h, k)).astype(float)
        actions = rng.integers(0, a, size=h)
        eps = rng.random(h) < 0.2
        terms = rng.random(h) < 0.15
        behavior = rng.integers(0, k, size=h)
        for i in range(k):
            on_policy = behavior == i
            got, _ = learner.targets_from_q(q[i], rewards[:, i], actions, eps, terms,
                                            on_policy, gamma)
            want = learner.oracle_targets_from_q(q[i], rewards[:, i], actions, eps,
                                                 terms, on_policy, gamma)
            if not np.array_equal(got, want):
                mismatches += 1
    return mismatches


def _cmd_run(args) -> int:
    overrides = {}
    if args.preset is not None:
        overrides["preset"] = args.preset
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.frames is not None:
        overrides["frames"] = args.frames
    if args.actors is not None:
        overrides["actors"] = args.actors
    if args.agent is not None:
        overrides["agent"] = args.agent
    if args.holdout is not None:
        overrides["holdout"] = args.holdout
    cfg = presets.load_config(args.config, overrides)
    run_dir = run_experiment(cfg, out_root=args.out)
    print(f"run complete: {run_dir}")
    print((run_dir / "summary.txt").read_text(), end="")
    return 0


def _cmd_eval(args) -> int:
    ckpt = Path(args.checkpoint)
    config_path = args.config
    if config_path is None:
        candidate = ckpt.parent.parent / "config.json"
        if not candidate.exists():
            raise ConfigError("no config.json found beside the checkpoint; pass --config")
        config_path = candidate
    cfg = presets.load_config(config_path)
    run_config, preset = presets.to_run_config(cfg)
    dims, params, _ = uvfa.load_checkpoint(ckpt)
    base = preset.task_set
    names = list(base.task_names)
    goal = names.index(args.goal) if args.goal in names else int(args.goal)
    rng = np.random.default_rng([cfg["seed"], 0xE7A1, 0])
    res = harness.evaluate(params, base.goal_matrix[goal], run_config.env, base,
                           args.episodes, rng, epsilon=run_config.epsilon_end,
                           reward_index=goal)
    print(f"goal {names[goal]}: mean reward {res.mean_reward:.3f} over {args.episodes} episodes")
    for name, value in zip(names, res.decomposition):
        print(f"  {name}: {value:.3f}")
    return 0


def _cmd_oracle_targets(args) -> int:
    mismatches = oracle_target_suite(args.seed, cases=args.cases)
    if mismatches:
        print(f"FAIL: {mismatches}/{args.cases} instances diverged from the oracle")
        return 1
    print(f"PASS: {args.cases} random instances match the recursive oracle exactly")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridgoals",
        description="goal-conditioned multi-task Q-learning on grid worlds")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="train a preset and write run artifacts")
    p_run.add_argument("--preset", choices=presets.PRESET_NAMES)
    p_run.add_argument("--config", help="JSON config file")
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--frames", type=int)
    p_run.add_argument("--actors", type=int)
    p_run.add_argument("--agent", help="unicorn | expert:<task> | glutton | random")
    p_run.add_argument("--holdout", help="zero-shot hold-out split: shape3 | diagonal")
    p_run.add_argument("--out", default="runs", help="root directory for run artifacts")
    p_run.set_defaults(func=_cmd_run)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on one goal")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--goal", required=True, help="task name or index")
    p_eval.add_argument("--episodes", type=int, default=20)
    p_eval.add_argument("--config", help="config.json (default: next to the checkpoint)")
    p_eval.set_defaults(func=_cmd_eval)

    p_oracle = sub.add_parser("oracle-targets",
                              help="check the target recursion against the naive oracle")
    p_oracle.add_argument("--seed", type=int, default=0)
    p_oracle.add_argument("--cases", type=int, default=1000)
    p_oracle.set_defaults(func=_cmd_oracle_targets)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
