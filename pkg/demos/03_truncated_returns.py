"""How off-policy returns are truncated at action mismatches.

Builds a tiny trajectory by hand and shows where the n-step accumulation
bootstraps for an on-policy goal, an off-policy goal, and across a terminal.
"""
import numpy as np

from gridgoals.learner import oracle_targets_from_q, targets_from_q

H, A = 6, 3
gamma = 0.9

# a Q table whose greedy action is always 0
q = np.zeros((H + 1, A))
q[:, 0] = 1.0
q[H] = [2.0, 0.0, 0.0]  # bootstrap value at the horizon

rewards = np.array([0.0, 1.0, 0.0, 0.0, 1.0, 0.0])
actions = np.array([0, 0, 1, 0, 0, 0])  # the mismatch sits at t=2
eps = np.zeros(H, dtype=bool)
terms = np.zeros(H, dtype=bool)

off_policy = np.zeros(H, dtype=bool)
targets, truncated = targets_from_q(q, rewards, actions, eps, terms, off_policy, gamma)
print("off-policy goal (mismatch at t=2 cuts the return):")
for t in range(H):
    mark = "bootstrapped early" if truncated[t] else "ran to the horizon"
    print(f"  G_{t} = {targets[t]:7.4f}   {mark}")

# the same trajectory from the behavior goal's perspective with an
# exploratory step at t=4: the flag alone forces a truncation
eps_on = eps.copy()
eps_on[4] = True
on_policy = np.ones(H, dtype=bool)
on_targets, on_trunc = targets_from_q(q, rewards, actions, eps_on, terms,
                                      on_policy, gamma)
print("\non-policy goal (exploratory flag at t=4 also truncates):")
for t in range(H):
    mark = "bootstrapped early" if on_trunc[t] else "ran to the horizon"
    print(f"  G_{t} = {on_targets[t]:7.4f}   {mark}")

# terminals zero the bootstrap
terms2 = terms.copy()
terms2[3] = True
t_targets, _ = targets_from_q(q, rewards, actions, eps, terms2, off_policy, gamma)
print(f"\nwith a terminal at t=3: G_3 = {t_targets[3]} (reward only, no bootstrap)")

# the naive recursive definition agrees exactly
want = oracle_targets_from_q(q, rewards, actions, eps, terms, off_policy, gamma)
print("\nvectorized == recursive oracle:", bool(np.array_equal(targets, want)))
