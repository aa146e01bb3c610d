"""Exact dynamic programming on enumerable MDPs.

Q-tables are plain ``[S, A]`` float arrays and tabular policies are ``[S, A]``
row-stochastic arrays.  Rows belonging to terminal states are kept at zero.
"""
from __future__ import annotations

import csv

import numpy as np

from ..mdp.tabular import TabularMDP


def check_policy(probs: np.ndarray, atol: float = 1e-12) -> np.ndarray:
    probs = np.asarray(probs, dtype=np.float64)
    if np.any(probs < 0) or not np.allclose(probs.sum(axis=1), 1.0, atol=atol):
        raise ValueError("policy rows must be nonnegative and sum to 1")
    return probs


def uniform_policy(mdp: TabularMDP) -> np.ndarray:
    return np.full((mdp.num_states, mdp.num_actions), 1.0 / mdp.num_actions)


def bellman_optimality_backup(q: np.ndarray, mdp: TabularMDP) -> np.ndarray:
    """``Q'(s,a) = E_{s'}[r(s') + gamma * max_a' Q(s',a')]``; terminal rows are 0."""
    v = np.where(mdp.terminal, 0.0, q.max(axis=1))
    out = mdp.P @ (mdp.rewards + mdp.gamma * v)
    out[mdp.terminal] = 0.0
    return out


def bellman_policy_backup(q: np.ndarray, policy: np.ndarray, mdp: TabularMDP) -> np.ndarray:
    v = np.where(mdp.terminal, 0.0, (policy * q).sum(axis=1))
    out = mdp.P @ (mdp.rewards + mdp.gamma * v)
    out[mdp.terminal] = 0.0
    return out


def solve_optimal_q(mdp: TabularMDP, tol: float = 1e-12, max_iter: int = 100_000):
    """Iterate the optimality backup from zero until the sup-norm change is below ``tol``."""
    q = np.zeros((mdp.num_states, mdp.num_actions))
    for it in range(max_iter):
        q_new = bellman_optimality_backup(q, mdp)
        delta = np.max(np.abs(q_new - q))
        q = q_new
        if delta < tol:
            return q, it + 1
    return q, max_iter


def policy_transition_matrix(mdp: TabularMDP, policy: np.ndarray, absorb: bool = False) -> np.ndarray:
    """State-to-state kernel under ``policy``.

    Terminal rows are zero (episode over) unless ``absorb`` is set, in which
    case terminal states loop onto themselves.
    """
    P_pi = np.einsum("sa,sat->st", policy, mdp.P)
    P_pi[mdp.terminal] = 0.0
    if absorb:
        idx = np.flatnonzero(mdp.terminal)
        P_pi[idx, idx] = 1.0
    return P_pi


def policy_values(mdp: TabularMDP, policy: np.ndarray):
    """Exact ``(V, Q)`` for ``policy`` via the linear system ``(I - gamma P_pi) V = r_pi``."""
    r_sa = mdp.expected_reward()
    P_pi = policy_transition_matrix(mdp, policy)
    r_pi = (policy * r_sa).sum(axis=1)
    V = np.linalg.solve(np.eye(mdp.num_states) - mdp.gamma * P_pi, r_pi)
    V[mdp.terminal] = 0.0
    Q = r_sa + mdp.gamma * (mdp.P @ V)
    Q[mdp.terminal] = 0.0
    return V, Q


def state_index(state) -> int:
    """Index of a one-hot state vector (or pass an int through)."""
    if np.isscalar(state):
        return int(state)
    return int(np.argmax(state))


def td_update(q: np.ndarray, t, alpha: float, gamma: float) -> np.ndarray:
    """One temporal-difference step on the visited cell; returns a new table."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    s, s2 = state_index(t.state), state_index(t.next_state)
    bootstrap = 0.0 if t.done else gamma * q[s2].max()
    out = q.copy()
    out[s, t.action] += alpha * (t.reward + bootstrap - q[s, t.action])
    return out


def greedy_action(q_row: np.ndarray) -> int:
    # np.argmax returns the first maximiser: ties go to the lowest index.
    return int(np.argmax(q_row))


def q_learning(env, steps: int, epsilon: float = 0.5, rng=None, q0=None):
    """Epsilon-greedy tabular TD control with per-cell step size ``1/N(s,a)``."""
    rng = np.random.default_rng(0) if rng is None else rng
    S, A = env.spec.state_dim, env.spec.action_count
    q = np.zeros((S, A)) if q0 is None else np.array(q0, dtype=np.float64)
    counts = np.zeros((S, A))
    state = env.reset()
    for _ in range(steps):
        s = state_index(state)
        if rng.random() < epsilon:
            a = int(rng.integers(A))
        else:
            a = greedy_action(q[s])
        t = env.step(a)
        counts[s, a] += 1
        alpha = 1.0 / counts[s, a]
        bootstrap = 0.0 if t.done else env.spec.gamma * q[state_index(t.next_state)].max()
        q[s, a] += alpha * (t.reward + bootstrap - q[s, a])
        state = env.reset() if t.done else t.next_state
    return q, counts


def export_q_csv(q: np.ndarray, path) -> None:
    """Write a Q-table as ``state,action,value`` rows."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["state", "action", "value"])
        for s in range(q.shape[0]):
            for a in range(q.shape[1]):
                w.writerow([s, a, repr(float(q[s, a]))])
