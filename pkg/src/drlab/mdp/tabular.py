"""Fully enumerable MDPs used by the theory lab and as small test environments.

Rewards follow the ``r(s')`` convention: the reward is a function of the
state being entered.  Terminal states absorb with zero further reward.

Layouts
-------
chain(n)
    States ``0..n-1`` on a line, start at 0, state ``n-1`` terminal.
    Actions: 0 = left, 1 = right.  Moving left from 0 stays at 0.
    Reward 1 for entering ``n-1``, 0 otherwise.
gridworld(w, h)
    Cell ``(x, y)`` has index ``y * w + x``.  Start ``(0, 0)``, goal
    ``(w-1, h-1)`` is terminal with reward 1; all other rewards are 0.
    Actions: 0 = up (+y), 1 = down (-y), 2 = left (-x), 3 = right (+x).
    Bumping into the border leaves the agent in place.
cliff(w, h)
    Same coordinates and actions as the gridworld.  Start ``(0, 0)``, goal
    ``(w-1, 0)``.  Cells ``(1..w-2, 0)`` form the cliff: entering one yields
    -100 and ends the episode.  Every other move, including into the goal,
    yields -1.

Both grid layouts and the chain accept ``slip``: with that probability the
chosen action is replaced by one drawn uniformly from all actions.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class TabularMDP:
    P: np.ndarray          # [S, A, S] transition probabilities
    rewards: np.ndarray    # [S] reward for entering each state
    terminal: np.ndarray   # [S] bool
    start: int = 0
    gamma: float = 0.9
    name: str = "tabular"

    def __post_init__(self):
        self.P = np.asarray(self.P, dtype=np.float64)
        self.rewards = np.asarray(self.rewards, dtype=np.float64)
        self.terminal = np.asarray(self.terminal, dtype=bool)
        S, A, S2 = self.P.shape
        if S != S2:
            raise ValueError("P must have shape [S, A, S]")
        if self.rewards.shape != (S,) or self.terminal.shape != (S,):
            raise ValueError("rewards/terminal must have shape [S]")
        if not np.allclose(self.P.sum(axis=2), 1.0, atol=1e-12):
            raise ValueError("transition rows must sum to 1")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("tabular MDPs need gamma in [0, 1)")

    @property
    def num_states(self) -> int:
        return self.P.shape[0]

    @property
    def num_actions(self) -> int:
        return self.P.shape[1]

    def expected_reward(self) -> np.ndarray:
        """``r(s, a) = E_{s'} r(s')`` with terminal rows zeroed."""
        r = self.P @ self.rewards
        r[self.terminal] = 0.0
        return r

    def with_gamma(self, gamma: float) -> "TabularMDP":
        return TabularMDP(self.P.copy(), self.rewards.copy(), self.terminal.copy(),
                          self.start, gamma, self.name)

    def one_hot(self, s: int) -> np.ndarray:
        v = np.zeros(self.num_states)
        v[s] = 1.0
        return v


def _apply_slip(P: np.ndarray, slip: float) -> np.ndarray:
    if slip <= 0.0:
        return P
    uniform = P.mean(axis=1, keepdims=True)
    return (1.0 - slip) * P + slip * uniform


def chain(n: int = 5, gamma: float = 0.9, slip: float = 0.0) -> TabularMDP:
    if n < 2:
        raise ValueError("chain needs at least 2 states")
    P = np.zeros((n, 2, n))
    for s in range(n):
        if s == n - 1:
            P[s, :, s] = 1.0
            continue
        P[s, 0, max(s - 1, 0)] = 1.0
        P[s, 1, s + 1] = 1.0
    rewards = np.zeros(n)
    rewards[n - 1] = 1.0
    terminal = np.zeros(n, dtype=bool)
    terminal[n - 1] = True
    P = _apply_slip(P, slip)
    P[n - 1] = 0.0
    P[n - 1, :, n - 1] = 1.0
    return TabularMDP(P, rewards, terminal, 0, gamma, f"chain({n})")


_MOVES = ((0, 1), (0, -1), (-1, 0), (1, 0))


def _grid_P(w: int, h: int, terminal: np.ndarray) -> np.ndarray:
    S = w * h
    P = np.zeros((S, 4, S))
    for y in range(h):
        for x in range(w):
            s = y * w + x
            for a, (dx, dy) in enumerate(_MOVES):
                if terminal[s]:
                    P[s, a, s] = 1.0
                    continue
                nx = min(max(x + dx, 0), w - 1)
                ny = min(max(y + dy, 0), h - 1)
                P[s, a, ny * w + nx] = 1.0
    return P


def _finish_grid(P, rewards, terminal, gamma, slip, name):
    P = _apply_slip(P, slip)
    for s in np.flatnonzero(terminal):
        P[s] = 0.0
        P[s, :, s] = 1.0
    return TabularMDP(P, rewards, terminal, 0, gamma, name)


def gridworld(w: int = 4, h: int = 4, gamma: float = 0.9, slip: float = 0.0) -> TabularMDP:
    S = w * h
    terminal = np.zeros(S, dtype=bool)
    goal = (h - 1) * w + (w - 1)
    terminal[goal] = True
    rewards = np.zeros(S)
    rewards[goal] = 1.0
    return _finish_grid(_grid_P(w, h, terminal), rewards, terminal, gamma, slip,
                        f"gridworld({w},{h})")


def cliff(w: int = 12, h: int = 4, gamma: float = 0.9, slip: float = 0.0) -> TabularMDP:
    S = w * h
    terminal = np.zeros(S, dtype=bool)
    rewards = -np.ones(S)
    for x in range(1, w - 1):
        terminal[x] = True
        rewards[x] = -100.0
    terminal[w - 1] = True
    return _finish_grid(_grid_P(w, h, terminal), rewards, terminal, gamma, slip,
                        f"cliff({w},{h})")


def layered(depth: int = 3, width: int = 2, num_actions: int = 2, gamma: float = 0.9,
            seed: int = 0) -> TabularMDP:
    """Random finite-horizon MDP: every episode ends after exactly ``depth`` steps.

    State 0 is the start, layer ``k`` holds ``width`` states and a single
    absorbing terminal sits after the last layer.  Transition rows and
    rewards are drawn from ``seed``.  Used where exhaustive trajectory
    enumeration is needed.
    """
    rng = np.random.default_rng(seed)
    layers = [[0]]
    nxt = 1
    for _ in range(depth - 1):
        layers.append(list(range(nxt, nxt + width)))
        nxt += width
    term = nxt
    S = term + 1
    P = np.zeros((S, num_actions, S))
    for k, layer in enumerate(layers):
        targets = layers[k + 1] if k + 1 < len(layers) else [term]
        for s in layer:
            P[s, :, targets] = rng.dirichlet(np.ones(len(targets)), size=num_actions).T
    P[term, :, term] = 1.0
    rewards = rng.normal(size=S)
    terminal = np.zeros(S, dtype=bool)
    terminal[term] = True
    return TabularMDP(P, rewards, terminal, 0, gamma, f"layered({depth})")
