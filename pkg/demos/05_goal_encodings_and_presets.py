"""The experiment presets and their goal encodings.

Prints the train/hold-out splits for the transfer experiments and the exact
goal vectors: one-hot, two-hot (color bit + shape bit), and the augmented
set with abstract color/shape tasks.
"""
import numpy as np

from gridgoals.presets import PRESET_NAMES, build_task_set, make_preset

print("presets:", ", ".join(PRESET_NAMES))

for name in ("transfer-offpolicy", "transfer-zeroshot", "transfer-augmented"):
    ts, enc, env, note = build_task_set(name)
    held = [ts.tasks[i].name for i in ts.holdout_indices]
    print(f"\n{name}: K={ts.num_tasks}, behavior goals={ts.num_train}, "
          f"learnable={int(ts.learnable.sum())}, encoding={enc.scheme}")
    print(f"  hold-out: {held}")
    if note:
        print(f"  note: {note}")

ts, enc, _, _ = build_task_set("transfer-augmented")
print("\naugmented goal vectors (first 4 colors | 4 shapes):")
for i in (0, 12, 16, 20):
    task = ts.tasks[i]
    print(f"  {task.name:12s} {enc.matrix[i].astype(int).tolist()}")

print("\nchain presets put one object type per chain position:")
for name in ("chain3", "chain4", "chain5"):
    preset = make_preset(name)
    ts = preset.task_set
    print(f"  {name}: {ts.task_names} "
          f"({sum(preset.env.object_counts)} objects, "
          f"{preset.env.episode_length}-step episodes)")
