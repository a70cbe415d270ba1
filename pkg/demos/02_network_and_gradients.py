"""The goal-conditioned value network, its gradients and the optimizer.

Builds a small network, checks the hand-derived gradients against central
finite differences on one tensor, and fits a toy batch with RMSProp.
"""
import numpy as np

from gridgoals import uvfa

dims = uvfa.NetDims(obs_dim=20, goal_dim=4, num_actions=4, num_goals=3,
                    repr_dim=16, hidden_dim=32)
params = uvfa.init_params(dims, seed=0)
rng = np.random.default_rng(0)

obs = rng.normal(size=dims.obs_dim)
goals = np.eye(3, dims.goal_dim)
q = uvfa.q_values(params, obs, goals)
print("Q-values, one row per goal:")
print(np.round(q, 4))

# gradient of the squared TD loss vs finite differences on the output bias
batch_obs = rng.normal(size=(8, dims.obs_dim))
batch_goals = goals[rng.integers(0, 3, size=8)]
batch_actions = rng.integers(0, dims.num_actions, size=8)
batch_targets = rng.normal(size=8)
_, grads = uvfa.gradients(params, batch_obs, batch_goals, batch_actions, batch_targets)


def loss_of(p):
    total = 0.0
    for o, g, a, t in zip(batch_obs, batch_goals, batch_actions, batch_targets):
        total += 0.5 * (t - uvfa.q_values(p, o, g)[0, a]) ** 2
    return total


step = 1e-6
fd = np.zeros_like(params.b2)
for i in range(fd.size):
    params.b2[i] += step
    hi = loss_of(params)
    params.b2[i] -= 2 * step
    lo = loss_of(params)
    params.b2[i] += step
    fd[i] = (hi - lo) / (2 * step)
print("\nanalytic d(loss)/d(output bias):", np.round(grads["b2"], 6))
print("finite differences:              ", np.round(fd, 6))

# a few optimizer steps shrink the loss
opt = uvfa.init_opt_state(params, learning_rate=5e-3)
for it in range(60):
    value, grads = uvfa.gradients(params, batch_obs, batch_goals, batch_actions,
                                  batch_targets)
    params, opt = uvfa.rmsprop_step(params, opt, grads)
    if it % 15 == 0:
        print(f"step {it:3d}: loss {value:.5f}")
print(f"final loss: {uvfa.gradients(params, batch_obs, batch_goals, batch_actions, batch_targets)[0]:.5f}")
