"""Exact policy-gradient quantities for softmax tabular policies.

The policy is ``pi(a|s) = softmax(theta[s])`` with ``theta`` of shape
``[S, A]``.  Objective ``J(theta) = V^pi(s0)``; every expectation below is
computed with linear solves, so the results serve as oracles for the
sampled estimators.
"""
from __future__ import annotations

import itertools

import numpy as np

from ..mdp.tabular import TabularMDP
from .dp import policy_transition_matrix, policy_values


def softmax_policy(theta: np.ndarray) -> np.ndarray:
    z = theta - theta.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def exact_J(mdp: TabularMDP, policy: np.ndarray) -> float:
    V, _ = policy_values(mdp, policy)
    return float(V[mdp.start])


def discounted_visitation(mdp: TabularMDP, policy: np.ndarray) -> np.ndarray:
    """``d(s) = (1 - gamma) sum_t gamma^t P(s_t = s)``; terminals absorb so mass sums to 1."""
    P_pi = policy_transition_matrix(mdp, policy, absorb=True)
    e0 = np.zeros(mdp.num_states)
    e0[mdp.start] = 1.0
    A = np.eye(mdp.num_states) - mdp.gamma * P_pi.T
    return np.linalg.solve(A, (1.0 - mdp.gamma) * e0)


def exact_policy_gradient(mdp: TabularMDP, theta: np.ndarray) -> np.ndarray:
    """``grad J = 1/(1-gamma) E_{s~d} E_{a~pi} [grad log pi(a|s) Q(s,a)]``.

    For the softmax table ``d log pi(a|s) / d theta[s,b] = 1[a=b] - pi(b|s)``,
    which collapses the inner expectation to ``pi(b|s) (Q(s,b) - V(s))``.
    """
    pi = softmax_policy(theta)
    V, Q = policy_values(mdp, pi)
    d = discounted_visitation(mdp, pi)
    return d[:, None] * pi * (Q - V[:, None]) / (1.0 - mdp.gamma)


def score_softmax(theta_row: np.ndarray, a: int) -> np.ndarray:
    p = softmax_policy(theta_row[None])[0]
    g = -p
    g[a] += 1.0
    return g


def enumerate_trajectories(mdp: TabularMDP, policy: np.ndarray, horizon: int):
    """Yield ``(prob, [(s, a, r', s'), ...])`` for every trajectory that terminates.

    Raises if some probability mass is still alive after ``horizon`` steps,
    since the enumeration would then be incomplete.
    """
    S, A = policy.shape
    frontier = [(1.0, [], mdp.start)]
    for _ in range(horizon):
        nxt = []
        for prob, path, s in frontier:
            for a, s2 in itertools.product(range(A), range(S)):
                p = prob * policy[s, a] * mdp.P[s, a, s2]
                if p == 0.0:
                    continue
                step = path + [(s, a, mdp.rewards[s2], s2)]
                if mdp.terminal[s2]:
                    yield p, step
                else:
                    nxt.append((p, step, s2))
        frontier = nxt
        if not frontier:
            return
    raise ValueError(f"trajectories survive past horizon {horizon}")


def trajectory_policy_gradient(mdp: TabularMDP, theta: np.ndarray, horizon: int) -> np.ndarray:
    """Trajectory form ``E_tau[ sum_t grad log pi(a_t|s_t) * R(tau) ]`` by exhaustive enumeration."""
    pi = softmax_policy(theta)
    grad = np.zeros_like(theta)
    for prob, path in enumerate_trajectories(mdp, pi, horizon):
        ret = sum(mdp.gamma ** t * r for t, (_, _, r, _) in enumerate(path))
        for s, a, _, _ in path:
            grad[s] += prob * ret * score_softmax(theta[s], a)
    return grad


def fd_gradient(f, theta: np.ndarray, h: float = 1e-5) -> np.ndarray:
    g = np.zeros_like(theta)
    for idx in np.ndindex(theta.shape):
        tp = theta.copy()
        tm = theta.copy()
        tp[idx] += h
        tm[idx] -= h
        g[idx] = (f(tp) - f(tm)) / (2 * h)
    return g


def advantage(mdp: TabularMDP, policy: np.ndarray) -> np.ndarray:
    V, Q = policy_values(mdp, policy)
    return Q - V[:, None]


def performance_identity_check(mdp: TabularMDP, pi_new: np.ndarray, pi_old: np.ndarray) -> float:
    """``|J(new) - J(old) - 1/(1-gamma) E_{d_new} E_new A_old|``."""
    A_old = advantage(mdp, pi_old)
    d_new = discounted_visitation(mdp, pi_new)
    rhs = np.dot(d_new, (pi_new * A_old).sum(axis=1)) / (1.0 - mdp.gamma)
    return abs(exact_J(mdp, pi_new) - exact_J(mdp, pi_old) - rhs)


def surrogate_L(mdp: TabularMDP, pi_new: np.ndarray, pi_old: np.ndarray) -> float:
    """``J(old) + 1/(1-gamma) E_{d_old} E_new A_old``: the identity with the old state distribution."""
    A_old = advantage(mdp, pi_old)
    d_old = discounted_visitation(mdp, pi_old)
    return exact_J(mdp, pi_old) + np.dot(d_old, (pi_new * A_old).sum(axis=1)) / (1.0 - mdp.gamma)


def max_kl(pi_old: np.ndarray, pi_new: np.ndarray, states=None) -> float:
    """``max_s KL(pi_old(.|s) || pi_new(.|s))`` over ``states`` (all by default)."""
    rows = slice(None) if states is None else states
    p, q = pi_old[rows], pi_new[rows]
    kl = np.sum(np.where(p > 0, p * (np.log(np.where(p > 0, p, 1.0)) - np.log(q)), 0.0), axis=-1)
    return float(np.max(kl))
