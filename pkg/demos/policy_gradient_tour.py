"""Policy gradients computed exactly on small MDPs, plus the natural-gradient toy.

Run: python3 demos/policy_gradient_tour.py
"""
import numpy as np

from drlab.agents import natural_gradient_invariance_check
from drlab.mdp import chain
from drlab.tabular import (exact_J, exact_policy_gradient, fd_gradient, max_kl,
                           performance_identity_check, softmax_policy, surrogate_L)

mdp = chain(4, gamma=0.9)
rng = np.random.default_rng(1)
theta = rng.normal(size=(4, 2))

g = exact_policy_gradient(mdp, theta)
fd = fd_gradient(lambda th: exact_J(mdp, softmax_policy(th)), theta)
print("exact gradient:\n", np.round(g, 5))
print("max |exact - finite difference| =", np.max(np.abs(g - fd)))

# Plain gradient ascent on the exact objective.
th = theta.copy()
for it in range(201):
    if it % 50 == 0:
        print(f"step {it:3d}  J = {exact_J(mdp, softmax_policy(th)):.4f}")
    th += 2.0 * exact_policy_gradient(mdp, th)

# Old-state-distribution surrogate vs the true objective as the step grows.
pi_old = softmax_policy(theta)
direction = rng.normal(size=theta.shape)
for eps in (0.05, 0.2, 0.8):
    pi = softmax_policy(theta + eps * direction)
    gap = abs(surrogate_L(mdp, pi, pi_old) - exact_J(mdp, pi))
    print(f"step {eps:4.2f}: max KL {max_kl(pi_old, pi):.4f}  |L - J| {gap:.2e}  "
          f"identity residual {performance_identity_check(mdp, pi, pi_old):.1e}")

# Natural steps agree across parametrisations; plain steps do not.
cube = lambda n: np.array([n[0] + n[1] ** 3, 2.0 * n[1]])
out = natural_gradient_invariance_check(np.array([0.3, -0.5]), cube)
print(f"natural step mismatch {out['natural_step_error']:.1e}, "
      f"plain step mismatch {out['plain_step_gap']:.3f}")
