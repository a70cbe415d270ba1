"""Run orchestration: actors feeding a bounded queue, one learner, evaluation.

Actors run in their own threads for multi-worker configurations; a
single-actor run uses a synchronous driver with the same queue and
accounting so that results are bit-reproducible per seed. Baselines (expert,
glutton, random) are reconfigurations of the same machinery.
"""
from __future__ import annotations

import csv
import queue as _queue
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import uvfa
from .actor import Actor, ActorConfig, run_episode_counts
from .env import ConfigError, EnvConfig, TaskSet, TaskSpec, observation_dim
from .learner import LearnerConfig, StepMetrics, train_step

AGENT_KINDS = ("unicorn", "expert", "glutton", "random")


class FrameCounter:
    """Shared monotone counter of environment frames across all actors."""

    def __init__(self):
        self.value = 0
        self._lock = threading.Lock()

    def add(self, n: int = 1) -> int:
        with self._lock:
            self.value += n
            return self.value


class SnapshotStore:
    """Latest published parameter snapshot; one writer, many readers."""

    def __init__(self, params: uvfa.NetParams):
        self._lock = threading.Lock()
        self._params = params
        self.version = 0

    def publish(self, params: uvfa.NetParams) -> int:
        with self._lock:
            self._params = params
            self.version += 1
            return self.version

    def get(self) -> tuple[int, uvfa.NetParams]:
        with self._lock:
            return self.version, self._params


class QueueClosed(Exception):
    pass


class TrajectoryQueue:
    """Bounded blocking multi-producer single-consumer queue with accounting.

    Producers block when the queue is at capacity (backpressure); nothing is
    ever dropped. Push/pop counts support the integrity check
    pushed == consumed + residual.
    """

    def __init__(self, capacity: int):
        self._q = _queue.Queue(maxsize=capacity)
        self.capacity = capacity
        self.pushed = 0
        self.consumed = 0
        self._lock = threading.Lock()
        self._closed = threading.Event()

    def close(self):
        self._closed.set()

    @property
    def closed(self) -> bool:
        return self._closed.is_set()

    def put(self, item, timeout: float = 0.05):
        while True:
            if self.closed:
                raise QueueClosed
            try:
                self._q.put(item, timeout=timeout)
            except _queue.Full:
                continue
            with self._lock:
                self.pushed += 1
            return

    def get(self, timeout: float = 0.05):
        try:
            item = self._q.get(timeout=timeout)
        except _queue.Empty:
            return None
        with self._lock:
            self.consumed += 1
        return item

    def __len__(self):
        return self._q.qsize()


@dataclass(frozen=True)
class RunConfig:
    env: EnvConfig
    task_set: TaskSet
    agent: str = "unicorn"  # unicorn | expert:<task> | glutton | random
    num_actors: int = 8
    total_env_frames: int = 200_000
    queue_capacity: int = 0  # 0 -> 4 * batch_size
    eval_every_frames: int = 50_000
    eval_episodes_per_goal: int = 4
    seed: int = 0
    learner: LearnerConfig = LearnerConfig()
    epsilon_start: float = 1.0
    epsilon_end: float = 0.01
    epsilon_anneal_frames: int = 1_000_000
    repr_dim: int = 128
    hidden_dim: int = 256
    threaded: bool | None = None  # default: threads only when num_actors > 1


@dataclass
class MetricsRow:
    frames: int
    goal_id: int  # base task index; -1 for goal-less rows (glutton, random)
    mean_reward: float
    decomposition: tuple[float, ...]  # mean per-episode counts, base task order
    loss: float
    truncation_rate: float
    wall_seconds: float


@dataclass
class RunReport:
    frames: int = 0
    pushed: int = 0
    consumed: int = 0
    residual: int = 0
    train_steps: int = 0
    duplicate_tags: int = 0
    failure: str | None = None


@dataclass
class RunResult:
    rows: list[MetricsRow]
    params: uvfa.NetParams
    opt_state: uvfa.OptState
    dims: uvfa.NetDims
    task_set: TaskSet  # the agent's training task set
    report: RunReport


@dataclass
class EvalResult:
    mean_reward: float
    decomposition: np.ndarray  # (K,) mean per-episode counts
    episode_counts: np.ndarray  # (episodes, K)


def make_baseline(task_set: TaskSet, kind: str) -> TaskSet:
    """Reshape the task set for a baseline agent.

    expert:<task> keeps a single task with its original goal vector;
    glutton prepends a synthetic task whose reward is the sum of all the
    others and makes it the only behavior/learnable goal. unicorn and
    random leave the set unchanged.
    """
    if kind in ("unicorn", "random"):
        return task_set
    if kind.startswith("expert:"):
        label = kind.split(":", 1)[1]
        names = [t.name for t in task_set.tasks]
        if label in names:
            idx = names.index(label)
        else:
            try:
                idx = int(label)
            except ValueError:
                raise ConfigError(f"expert task {label!r} not one of {names}") from None
            if not 0 <= idx < len(names):
                raise ConfigError(f"expert task index {idx} out of range for {len(names)} tasks")
        return TaskSet(
            objects=task_set.objects,
            tasks=(task_set.tasks[idx],),
            num_train=1,
            goal_matrix=task_set.goal_matrix[idx:idx + 1].copy(),
            learnable=np.array([True]),
        )
    if kind == "glutton":
        tasks = (TaskSpec("glutton-sum", -1, "glutton"),) + task_set.tasks
        goal_matrix = np.vstack([np.ones((1, task_set.goal_dim)), task_set.goal_matrix])
        learnable = np.concatenate([[True], np.zeros(task_set.num_tasks, dtype=bool)])
        return TaskSet(objects=task_set.objects, tasks=tasks, num_train=1,
                       goal_matrix=goal_matrix, learnable=learnable)
    raise ConfigError(f"unknown agent kind {kind!r}; expected one of {AGENT_KINDS}")


def _chain_positions(task_set: TaskSet) -> list[int]:
    """Task indices of chain-step tasks ordered by chain position."""
    chain = [(t.target, i) for i, t in enumerate(task_set.tasks) if t.kind == "chain-step"]
    return [i for _, i in sorted(chain)]


def evaluate(params: uvfa.NetParams | None, goal_vector: np.ndarray | None,
             env_config: EnvConfig, task_set: TaskSet, episodes: int,
             rng: np.random.Generator, epsilon: float = 0.01,
             reward_index: int | None = None) -> EvalResult:
    """Run full episodes conditioned on one goal and average the reward counts.

    In chain worlds the per-episode counts must be non-increasing along the
    chain (a reward at position p needs a fresh reward at every position
    below it first); this is asserted on every episode.
    """
    counts = np.stack([
        run_episode_counts(params, goal_vector, env_config, task_set, epsilon, rng,
                           reward_index=reward_index)
        for _ in range(episodes)
    ])
    chain = _chain_positions(task_set)
    for ep in counts:
        for a, b in zip(chain, chain[1:]):
            assert ep[a] >= ep[b], (
                f"chain ordering violated: task {task_set.tasks[a].name} count {ep[a]} "
                f"< task {task_set.tasks[b].name} count {ep[b]}")
    mean = counts.mean(axis=0)
    pursued = float(mean.sum()) if reward_index is None else float(mean[reward_index])
    return EvalResult(mean_reward=pursued, decomposition=mean, episode_counts=counts)


def random_baseline(env_config: EnvConfig, task_set: TaskSet, episodes: int,
                    seed: int) -> EvalResult:
    """Monte-Carlo estimate of per-task reward counts under a uniform policy."""
    rng = np.random.default_rng([seed, 0xBA5E])
    return evaluate(None, None, env_config, task_set, episodes, rng)


def expert_frames_account(frames_per_expert, num_tasks: int = 0):
    """Total experience consumed by a family of single-task experts.

    Comparisons against a multi-goal run must charge the expert family the
    sum of all its runs' frames, not a single run's.
    """
    if np.isscalar(frames_per_expert):
        return int(frames_per_expert) * int(num_tasks)
    return int(sum(frames_per_expert))


class _Run:
    """State shared by the synchronous and threaded drivers."""

    def __init__(self, config: RunConfig):
        if config.num_actors < 1:
            raise ConfigError("need at least one actor")
        capacity = config.queue_capacity or 4 * config.learner.batch_size
        if capacity < config.learner.batch_size:
            raise ConfigError("queue capacity must hold at least one batch")
        self.config = config
        self.agent_ts = make_baseline(config.task_set, config.agent)
        self.dims = uvfa.NetDims(
            obs_dim=observation_dim(config.env, self.agent_ts.num_types),
            goal_dim=self.agent_ts.goal_dim,
            num_actions=4,
            num_goals=self.agent_ts.num_tasks,
            repr_dim=config.repr_dim,
            hidden_dim=config.hidden_dim,
        )
        self.params = uvfa.init_params(self.dims, config.seed)
        self.opt = uvfa.init_opt_state(self.params, config.learner.learning_rate,
                                       config.learner.rms_decay, config.learner.rms_epsilon)
        self.store = SnapshotStore(self.params)
        self.frames = FrameCounter()
        self.queue = TrajectoryQueue(capacity)
        self.actor_config = ActorConfig(
            epsilon_start=config.epsilon_start,
            epsilon_end=config.epsilon_end,
            epsilon_anneal_frames=config.epsilon_anneal_frames,
            unroll=config.learner.unroll,
        )
        self.actors = [
            Actor(i, config.env, self.agent_ts, self.actor_config, config.seed, self.frames)
            for i in range(config.num_actors)
        ]
        self.rows: list[MetricsRow] = []
        self.report = RunReport()
        self.seen_tags: set[tuple[int, int]] = set()
        self.next_eval = config.eval_every_frames
        self.eval_index = 0
        self._last_eval_frames = -1
        self.started = time.time()
        self._loss_acc: list[float] = []
        self._trunc_acc: list[float] = []

    # -- evaluation ---------------------------------------------------------

    def _eval_goals(self):
        """(goal_id, goal_vector, reward_index) triples evaluated per cadence point."""
        base = self.config.task_set
        kind = self.config.agent
        if kind == "glutton":
            return [(-1, self.agent_ts.goal_matrix[0], None)]
        if kind == "random":
            return [(-1, None, None)]
        if kind.startswith("expert:"):
            expert_task = self.agent_ts.tasks[0]
            base_idx = base.tasks.index(expert_task)
            return [(base_idx, self.agent_ts.goal_matrix[0], base_idx)]
        return [(i, base.goal_matrix[i], i) for i in range(base.num_tasks)]

    def run_evaluation(self):
        """One evaluation sweep; appends one row per evaluated goal."""
        cfg = self.config
        frames_now = self.frames.value
        self._last_eval_frames = frames_now
        mean_loss = float(np.mean(self._loss_acc)) if self._loss_acc else float("nan")
        mean_trunc = float(np.mean(self._trunc_acc)) if self._trunc_acc else float("nan")
        self._loss_acc, self._trunc_acc = [], []
        params = None if cfg.agent == "random" else self.store.get()[1]
        for pos, (goal_id, goal_vec, reward_index) in enumerate(self._eval_goals()):
            rng = np.random.default_rng([cfg.seed, 0xE7A1, self.eval_index, pos])
            res = evaluate(params, goal_vec, cfg.env, cfg.task_set,
                           cfg.eval_episodes_per_goal, rng, epsilon=cfg.epsilon_end,
                           reward_index=reward_index)
            self.rows.append(MetricsRow(
                frames=frames_now,
                goal_id=goal_id,
                mean_reward=res.mean_reward,
                decomposition=tuple(float(v) for v in res.decomposition),
                loss=mean_loss,
                truncation_rate=mean_trunc,
                wall_seconds=time.time() - self.started,
            ))
        self.eval_index += 1

    # -- learner ------------------------------------------------------------

    def train_on(self, batch):
        tags = {t.tag for t in batch}
        dup = len(batch) - len(tags) + len(tags & self.seen_tags)
        self.report.duplicate_tags += dup
        self.seen_tags |= tags
        self.params, self.opt, metrics = train_step(
            batch, self.params, self.opt, self.agent_ts, self.config.learner)
        self.store.publish(self.params)
        self.report.train_steps += 1
        self._loss_acc.append(metrics.loss)
        self._trunc_acc.append(metrics.truncation_rate)
        while self.frames.value >= self.next_eval:
            self.run_evaluation()
            self.next_eval += self.config.eval_every_frames

    def finish(self):
        if self.frames.value != self._last_eval_frames:
            self.run_evaluation()
        self.report.frames = self.frames.value
        self.report.pushed = self.queue.pushed
        self.report.consumed = self.queue.consumed
        self.report.residual = len(self.queue)
        return RunResult(rows=self.rows, params=self.params, opt_state=self.opt,
                         dims=self.dims, task_set=self.agent_ts, report=self.report)


def _run_sync(state: _Run) -> RunResult:
    cfg = state.config
    batch_size = cfg.learner.batch_size
    turn = 0
    while state.frames.value < cfg.total_env_frames:
        actor = state.actors[turn % len(state.actors)]
        turn += 1
        version, params = state.store.get()
        traj = actor.run_rollout(params, snapshot_version=version)
        state.queue.put(traj)
        while len(state.queue) >= batch_size:
            batch = [state.queue.get() for _ in range(batch_size)]
            state.train_on(batch)
    while len(state.queue) >= batch_size:
        batch = [state.queue.get() for _ in range(batch_size)]
        state.train_on(batch)
    while len(state.queue) > 0:  # consume the final partial batch
        state.queue.get()
    return state.finish()


def _run_threaded(state: _Run) -> RunResult:
    cfg = state.config
    batch_size = cfg.learner.batch_size
    stop = threading.Event()
    errors: list[BaseException] = []

    def worker(actor: Actor):
        try:
            while not stop.is_set() and state.frames.value < cfg.total_env_frames:
                version, params = state.store.get()
                traj = actor.run_rollout(params, snapshot_version=version)
                state.queue.put(traj)
        except QueueClosed:
            pass
        except BaseException as exc:  # surfaced by the learner loop
            errors.append(exc)
            stop.set()

    threads = [threading.Thread(target=worker, args=(a,), daemon=True) for a in state.actors]
    for t in threads:
        t.start()
    batch: list = []
    try:
        while True:
            if state.frames.value >= cfg.total_env_frames:
                stop.set()
            item = state.queue.get()
            if item is not None:
                batch.append(item)
                if len(batch) == batch_size:
                    state.train_on(batch)
                    batch = []
            elif stop.is_set() and not any(t.is_alive() for t in threads) and len(state.queue) == 0:
                break
            if errors:
                raise RuntimeError("actor worker failed") from errors[0]
    finally:
        stop.set()
        state.queue.close()
        for t in threads:
            t.join(timeout=5.0)
    return state.finish()


def run(config: RunConfig, out_dir: str | Path | None = None) -> RunResult:
    """Train (or, for the random agent, just evaluate) under one configuration.

    Writes metrics.csv and checkpoints/final.npz under `out_dir` when given.
    Single-actor runs are bit-deterministic per seed; threaded runs are not.
    """
    state = _Run(config)
    try:
        if config.agent == "random":
            result = state.finish()
        else:
            threaded = config.threaded if config.threaded is not None else config.num_actors > 1
            result = _run_threaded(state) if threaded else _run_sync(state)
    except BaseException as exc:
        state.report.failure = repr(exc)
        if out_dir is not None:
            _write_artifacts(state.finish(), config, Path(out_dir))
        raise
    if out_dir is not None:
        _write_artifacts(result, config, Path(out_dir))
    return result


def _write_artifacts(result: RunResult, config: RunConfig, out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    write_metrics_csv(out_dir / "metrics.csv", result.rows, config.task_set.task_names)
    ckpt_dir = out_dir / "checkpoints"
    ckpt_dir.mkdir(exist_ok=True)
    uvfa.save_checkpoint(ckpt_dir / "final.npz", result.dims, result.params,
                         result.opt_state)
    if result.report.failure:
        (out_dir / "failure.txt").write_text(result.report.failure + "\n")


def write_metrics_csv(path, rows: list[MetricsRow], task_names):
    """One row per (evaluation point, goal); floats at full precision."""
    header = (["frames", "goal_id", "mean_reward"]
              + [f"decomp_{name}" for name in task_names]
              + ["loss", "truncation_rate", "wall_seconds"])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([row.frames, row.goal_id, repr(row.mean_reward)]
                            + [repr(v) for v in row.decomposition]
                            + [repr(row.loss), repr(row.truncation_rate),
                               f"{row.wall_seconds:.3f}"])


def read_metrics_csv(path):
    """Rows back as dicts with numeric fields parsed."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        out = []
        for rec in reader:
            parsed = {k: (int(v) if k in ("frames", "goal_id") else float(v))
                      for k, v in rec.items()}
            out.append(parsed)
        return out
