"""Basic MDP records: specs, transitions, trajectories and returns."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


@dataclass(frozen=True)
class MdpSpec:
    """Static description of an environment.

    ``max_episode_len=None`` marks an unbounded (continuing) task, in which
    case the discount must be strictly below one.
    """

    state_dim: int
    action_count: int
    gamma: float = 0.99
    max_episode_len: Optional[int] = None

    def __post_init__(self):
        if self.state_dim < 1:
            raise ValueError("state_dim must be positive")
        if self.action_count < 2:
            raise ValueError("action_count must be at least 2")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.max_episode_len is None and self.gamma >= 1.0:
            raise ValueError("unbounded episodes require gamma < 1")
        if self.max_episode_len is not None and self.max_episode_len < 1:
            raise ValueError("max_episode_len must be positive")


@dataclass
class Transition:
    """One interaction record ``(s, a, r', s', done)``."""

    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    done: bool

    def __post_init__(self):
        if not np.isfinite(self.reward):
            raise ValueError(f"non-finite reward {self.reward}")


@dataclass
class Trajectory:
    transitions: list = field(default_factory=list)

    def append(self, t: Transition) -> None:
        if self.transitions and self.transitions[-1].done:
            raise ValueError("trajectory already ended")
        self.transitions.append(t)

    @property
    def rewards(self) -> np.ndarray:
        return np.array([t.reward for t in self.transitions], dtype=np.float64)

    @property
    def episode_return(self) -> float:
        return float(self.rewards.sum())

    @property
    def length(self) -> int:
        return len(self.transitions)

    @property
    def finished(self) -> bool:
        return bool(self.transitions) and self.transitions[-1].done

    def __len__(self):
        return len(self.transitions)

    def __iter__(self):
        return iter(self.transitions)


def discounted_return(traj, gamma: float) -> float:
    """Return ``sum_t gamma^t r_{t+1}``.

    ``traj`` may be a :class:`Trajectory` or a plain sequence of rewards.
    """
    if isinstance(traj, Trajectory):
        rewards = traj.rewards
    else:
        rewards = np.asarray(traj, dtype=np.float64)
    if rewards.size == 0:
        return 0.0
    if gamma == 0.0:
        return float(rewards[0])
    discounts = gamma ** np.arange(rewards.size, dtype=np.float64)
    return float(np.dot(discounts, rewards))


def rewards_to_go(rewards: Sequence[float], gamma: float) -> np.ndarray:
    """Discounted reward-to-go ``G_t = sum_{t'>=t} gamma^{t'-t} r_{t'+1}``."""
    rewards = np.asarray(rewards, dtype=np.float64)
    out = np.zeros_like(rewards)
    acc = 0.0
    for i in range(rewards.size - 1, -1, -1):
        acc = rewards[i] + gamma * acc
        out[i] = acc
    return out
