"""Goal-conditioned action-value network, from scratch on numpy.

A single rectified-linear encoder maps the observation to a goal-independent
representation which is concatenated with each goal vector and pushed through
a two-layer MLP head, giving one row of Q-values per goal. Gradients are
exact and hand-derived; the optimizer is RMSProp with epsilon inside the
square root.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class NetDims:
    obs_dim: int
    goal_dim: int
    num_actions: int
    num_goals: int
    repr_dim: int = 128
    hidden_dim: int = 256


@dataclass(frozen=True)
class NetParams:
    """All trainable tensors. Weights are (out, in); inputs multiply as x @ W.T.

    Treated as an immutable snapshot: optimizer steps return fresh arrays, so
    actors can keep evaluating an old snapshot while the learner moves on.
    """

    w_enc: np.ndarray  # (repr, obs)
    b_enc: np.ndarray  # (repr,)
    w1: np.ndarray  # (hidden, repr + goal)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (actions, hidden)
    b2: np.ndarray  # (actions,)

    def tensors(self) -> dict[str, np.ndarray]:
        return {"w_enc": self.w_enc, "b_enc": self.b_enc, "w1": self.w1,
                "b1": self.b1, "w2": self.w2, "b2": self.b2}


@dataclass(frozen=True)
class OptState:
    """Squared-gradient accumulators plus the RMSProp hyperparameters."""

    acc: dict[str, np.ndarray]
    learning_rate: float = 2e-4
    decay: float = 0.99
    epsilon: float = 0.01


def init_params(dims: NetDims, seed: int) -> NetParams:
    """Uniform weights scaled by 1/sqrt(fan_in), zero biases, deterministic per seed."""
    rng = np.random.default_rng(seed)

    def layer(out_dim, in_dim):
        bound = 1.0 / np.sqrt(in_dim)
        return rng.uniform(-bound, bound, size=(out_dim, in_dim))

    return NetParams(
        w_enc=layer(dims.repr_dim, dims.obs_dim),
        b_enc=np.zeros(dims.repr_dim),
        w1=layer(dims.hidden_dim, dims.repr_dim + dims.goal_dim),
        b1=np.zeros(dims.hidden_dim),
        w2=layer(dims.num_actions, dims.hidden_dim),
        b2=np.zeros(dims.num_actions),
    )


def init_opt_state(params: NetParams, learning_rate: float = 2e-4,
                   decay: float = 0.99, epsilon: float = 0.01) -> OptState:
    acc = {k: np.zeros_like(v) for k, v in params.tensors().items()}
    return OptState(acc=acc, learning_rate=learning_rate, decay=decay, epsilon=epsilon)


def encode(params: NetParams, observation: np.ndarray) -> np.ndarray:
    """Goal-independent representation f(s) = relu(W @ obs + b)."""
    observation = np.asarray(observation)
    if observation.shape[-1] != params.w_enc.shape[1]:
        raise ValueError(f"observation has dim {observation.shape[-1]}, "
                         f"expected {params.w_enc.shape[1]}")
    return np.maximum(observation @ params.w_enc.T + params.b_enc, 0.0)


def q_values(params: NetParams, observation: np.ndarray, goal_matrix: np.ndarray) -> np.ndarray:
    """K x A matrix of Q-values; row i conditions the head on goal row i.

    The encoder runs once and its output is shared across all goal rows.
    """
    goal_matrix = np.atleast_2d(np.asarray(goal_matrix))
    f = encode(params, observation)
    k = goal_matrix.shape[0]
    x = np.concatenate([np.broadcast_to(f, (k, f.shape[0])), goal_matrix], axis=1)
    if x.shape[1] != params.w1.shape[1]:
        raise ValueError(f"repr+goal dim {x.shape[1]} does not match head "
                         f"input {params.w1.shape[1]}")
    h = np.maximum(x @ params.w1.T + params.b1, 0.0)
    return h @ params.w2.T + params.b2


def head_cache(params: NetParams, goal_row: np.ndarray):
    """Precomputed pieces for repeated single-goal evaluation.

    The goal half of the first head layer collapses into a constant bias while
    the goal is fixed, which it is for a whole episode.
    """
    repr_dim = params.w_enc.shape[0]
    w_enc_t = np.ascontiguousarray(params.w_enc.T)
    w1_obs = np.ascontiguousarray(params.w1[:, :repr_dim])
    goal_bias = params.w1[:, repr_dim:] @ np.asarray(goal_row) + params.b1
    return w_enc_t, w1_obs, goal_bias


def q_single(params: NetParams, observation: np.ndarray, cache) -> np.ndarray:
    """One row of Q-values via the cache from `head_cache`; same math as q_values."""
    _, w1_obs, goal_bias = cache
    f = params.w_enc @ observation + params.b_enc
    np.maximum(f, 0.0, out=f)
    h = w1_obs @ f + goal_bias
    np.maximum(h, 0.0, out=h)
    return params.w2 @ h + params.b2


def q_single_sparse(params: NetParams, one_hot_indices: np.ndarray,
                    trailing_value: float, cache) -> np.ndarray:
    """q_single for observations given as one-hot indices plus a final scalar.

    The encoder multiply reduces to summing the weight columns picked out by
    the active bits.
    """
    w_enc_t, w1_obs, goal_bias = cache
    f = w_enc_t[one_hot_indices].sum(axis=0) + params.b_enc
    if trailing_value != 0.0:
        f += trailing_value * w_enc_t[-1]
    np.maximum(f, 0.0, out=f)
    h = w1_obs @ f + goal_bias
    np.maximum(h, 0.0, out=h)
    return params.w2 @ h + params.b2


def gradients(params: NetParams, observations: np.ndarray, goals: np.ndarray,
              actions: np.ndarray, targets: np.ndarray):
    """Exact gradient of 0.5 * sum((target - Q(s,a;g))^2) over the batch.

    Targets are plain numbers; no error flows through them. Only the selected
    action's output unit contributes per example. Returns (loss, grads) with
    grads shaped like the parameter tensors.
    """
    obs = np.asarray(observations, dtype=float)
    goals = np.asarray(goals, dtype=float)
    actions = np.asarray(actions)
    targets = np.asarray(targets, dtype=float)
    if not (np.isfinite(obs).all() and np.isfinite(goals).all() and np.isfinite(targets).all()):
        raise FloatingPointError("non-finite values in gradient batch")
    n = obs.shape[0]
    idx = np.arange(n)

    z_enc = obs @ params.w_enc.T + params.b_enc
    f = np.maximum(z_enc, 0.0)
    x = np.concatenate([f, goals], axis=1)
    z1 = x @ params.w1.T + params.b1
    h = np.maximum(z1, 0.0)
    q = h @ params.w2.T + params.b2

    delta = q[idx, actions] - targets  # dL/dq at the chosen action
    loss = 0.5 * float(delta @ delta)

    dq = np.zeros_like(q)
    dq[idx, actions] = delta
    g_w2 = dq.T @ h
    g_b2 = dq.sum(axis=0)
    dz1 = (dq @ params.w2) * (z1 > 0)
    g_w1 = dz1.T @ x
    g_b1 = dz1.sum(axis=0)
    dz_enc = (dz1 @ params.w1)[:, :f.shape[1]] * (z_enc > 0)
    g_we = dz_enc.T @ obs
    g_be = dz_enc.sum(axis=0)

    grads = {"w_enc": g_we, "b_enc": g_be, "w1": g_w1, "b1": g_b1, "w2": g_w2, "b2": g_b2}
    return loss, grads


def rmsprop_step(params: NetParams, opt_state: OptState,
                 grads: dict[str, np.ndarray]) -> tuple[NetParams, OptState]:
    """acc' = decay*acc + (1-decay)*g^2; param' = param - lr * g / sqrt(acc' + eps)."""
    new_acc = {}
    new_tensors = {}
    for name, p in params.tensors().items():
        g = grads[name]
        a = opt_state.decay * opt_state.acc[name] + (1.0 - opt_state.decay) * g * g
        new_acc[name] = a
        new_tensors[name] = p - opt_state.learning_rate * g / np.sqrt(a + opt_state.epsilon)
    return (NetParams(**new_tensors),
            OptState(acc=new_acc, learning_rate=opt_state.learning_rate,
                     decay=opt_state.decay, epsilon=opt_state.epsilon))


def save_checkpoint(path, dims: NetDims, params: NetParams,
                    opt_state: OptState | None = None) -> None:
    """Round-trip exact dump of dims + tensors (+ optimizer accumulators)."""
    payload = {
        "version": np.array(CHECKPOINT_VERSION),
        "dims": np.array([dims.obs_dim, dims.goal_dim, dims.num_actions,
                          dims.num_goals, dims.repr_dim, dims.hidden_dim]),
    }
    for name, t in params.tensors().items():
        payload[f"param/{name}"] = t
    if opt_state is not None:
        payload["opt/hyper"] = np.array([opt_state.learning_rate, opt_state.decay,
                                         opt_state.epsilon])
        for name, t in opt_state.acc.items():
            payload[f"acc/{name}"] = t
    np.savez(path, **payload)


def load_checkpoint(path) -> tuple[NetDims, NetParams, OptState | None]:
    with np.load(path) as data:
        version = int(data["version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        d = data["dims"]
        dims = NetDims(obs_dim=int(d[0]), goal_dim=int(d[1]), num_actions=int(d[2]),
                       num_goals=int(d[3]), repr_dim=int(d[4]), hidden_dim=int(d[5]))
        params = NetParams(**{name: data[f"param/{name}"]
                              for name in ("w_enc", "b_enc", "w1", "b1", "w2", "b2")})
        opt = None
        if "opt/hyper" in data:
            lr, decay, eps = data["opt/hyper"]
            acc = {name: data[f"acc/{name}"]
                   for name in ("w_enc", "b_enc", "w1", "b1", "w2", "b2")}
            opt = OptState(acc=acc, learning_rate=float(lr), decay=float(decay),
                           epsilon=float(eps))
    return dims, params, opt
