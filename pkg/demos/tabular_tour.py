"""Exact tabular tour: value iteration, contraction, and the projected return distribution.

Run: python3 demos/tabular_tour.py
"""
import numpy as np

from drlab.mdp import chain, gridworld
from drlab.tabular import (DiscreteDistribution, bellman_optimality_backup,
                           distributional_policy_eval_backup, max_wasserstein, point_mass_table,
                           policy_values, quantile_projection, solve_optimal_q, support_grid,
                           table_means, uniform_policy, wasserstein)

# Optimal values on a 4x4 grid: the goal sits in the far corner.
grid_mdp = gridworld(4, 4)
q, sweeps = solve_optimal_q(grid_mdp)
print(f"gridworld 4x4: value iteration converged in {sweeps} sweeps")
print("V* by row:\n", np.round(q.max(axis=1).reshape(4, 4), 3))

# The backup shrinks the distance between any two tables by at least gamma.
rng = np.random.default_rng(0)
q1, q2 = rng.normal(size=(2,) + q.shape)
before = np.max(np.abs(q1 - q2))
after = np.max(np.abs(bellman_optimality_backup(q1, grid_mdp) - bellman_optimality_backup(q2, grid_mdp)))
print(f"sup distance {before:.3f} -> {after:.3f} (gamma = {grid_mdp.gamma})")

# Distributional evaluation of the uniform policy on chain(5).
mdp = chain(5, gamma=0.9)
atoms = support_grid(0.0, 1.0, 51)
pi = uniform_policy(mdp)
z = point_mass_table(mdp, atoms)
prev = None
for k in range(8):
    z_new = distributional_policy_eval_backup(z, pi, mdp, atoms)
    d = max_wasserstein(z_new, z, atoms)
    note = "" if prev is None else f"  ratio {d / prev:.3f}"
    print(f"iterate {k}: sup W1 step {d:.5f}{note}")
    prev, z = d, z_new
for _ in range(200):
    z = distributional_policy_eval_backup(z, pi, mdp, atoms)
_, Q = policy_values(mdp, pi)
print("after 208 iterates, means vs exact Q at state 0:", np.round(table_means(z, atoms)[0], 4), np.round(Q[0], 4))

# Quantile projection: the W1-best equal-weight summary of a distribution.
src = DiscreteDistribution(np.array([0.0, 1.0, 4.0]), np.array([0.5, 0.3, 0.2]))
proj = quantile_projection(src, 4)
print("quantile atoms:", proj, "W1 =", round(wasserstein(src, DiscreteDistribution.from_atoms(proj)), 4))
