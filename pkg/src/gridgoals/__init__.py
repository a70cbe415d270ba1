"""Goal-conditioned multi-task Q-learning on grid worlds.

A single value network conditioned on goal vectors is trained off-policy on
every task at once from parallel actor experience, with truncated n-step
returns. Ships a collectible-object grid world with inventory-dependent
reward chains, from-scratch network/optimizer code, an actor-learner harness
with expert/glutton/random baselines and the experiment presets.
"""
from .actor import Actor, ActorConfig, act, epsilon_at, sample_goal
from .env import (ALWAYS_COLLECT, CONDITIONAL_PICKUP, ConfigError, EnvConfig,
                  ObjectType, TaskSet, TaskSpec, WorldState, observation_dim,
                  observe, pseudo_rewards, reset, step)
from .harness import (EvalResult, MetricsRow, RunConfig, RunResult, evaluate,
                      expert_frames_account, make_baseline, random_baseline, run)
from .learner import (LearnerConfig, Trajectory, loss, oracle_targets_from_q,
                      targets_from_q, train_step, truncated_targets)
from .presets import (ExperimentPreset, GoalEncoding, PRESET_NAMES, build_task_set,
                      load_config, make_preset, normalize_config, to_run_config)
from .uvfa import (NetDims, NetParams, OptState, encode, gradients, init_opt_state,
                   init_params, load_checkpoint, q_values, rmsprop_step,
                   save_checkpoint)

__version__ = "0.1.0"
