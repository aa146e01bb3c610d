"""Uniform and proportional-prioritized replay buffers.

Records are stored column-wise in preallocated arrays.  Any object with
``state, action, reward, next_state, done`` attributes can be pushed; an
``n_used`` attribute (N-step records) defaults to 1 when absent.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .sumtree import SumTree


class BufferUnderfilledError(RuntimeError):
    pass


@dataclass
class Batch:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray
    n_used: np.ndarray
    indices: np.ndarray
    weights: np.ndarray
    probs: Optional[np.ndarray] = None

    def __len__(self):
        return self.actions.shape[0]


def beta_schedule(t: int, beta0: float = 0.4, t_beta: int = 100_000) -> float:
    """Linear anneal of the IS exponent from ``beta0`` to 1 over ``t_beta`` steps."""
    if t_beta <= 0:
        return 1.0
    return float(min(1.0, beta0 + (1.0 - beta0) * t / t_beta))


class ReplayBuffer:
    """FIFO ring buffer with uniform sampling (with replacement)."""

    def __init__(self, capacity: int, rng=None):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.rng = np.random.default_rng() if rng is None else rng
        self.size = 0
        self.cursor = 0
        self.pushes = 0
        self._cols = None

    def __len__(self):
        return self.size

    def _alloc(self, record):
        state = np.asarray(record.state, dtype=np.float64)
        M = self.capacity
        self._cols = {
            "states": np.zeros((M,) + state.shape),
            "actions": np.zeros(M, dtype=np.int64),
            "rewards": np.zeros(M),
            "next_states": np.zeros((M,) + state.shape),
            "dones": np.zeros(M, dtype=bool),
            "n_used": np.ones(M, dtype=np.int64),
            "birth": np.zeros(M, dtype=np.int64),
        }

    def push(self, record, priority=None) -> int:
        if self._cols is None:
            self._alloc(record)
        slot = self.cursor
        c = self._cols
        c["states"][slot] = record.state
        c["actions"][slot] = record.action
        c["rewards"][slot] = record.reward
        c["next_states"][slot] = record.next_state
        c["dones"][slot] = record.done
        c["n_used"][slot] = getattr(record, "n_used", 1)
        c["birth"][slot] = self.pushes
        self.pushes += 1
        self.cursor = (self.cursor + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        self._on_push(slot, priority)
        return slot

    def _on_push(self, slot, priority):
        pass

    def ages(self) -> np.ndarray:
        """Insertion counters of the stored slots, indexed by slot."""
        return self._cols["birth"][:self.size].copy()

    def gather(self, idx, weights=None, probs=None) -> Batch:
        c = self._cols
        w = np.ones(len(idx)) if weights is None else weights
        return Batch(c["states"][idx], c["actions"][idx], c["rewards"][idx],
                     c["next_states"][idx], c["dones"][idx], c["n_used"][idx],
                     np.asarray(idx), w, probs)

    def sample_indices(self, batch_size: int) -> np.ndarray:
        if self.size == 0:
            raise BufferUnderfilledError("cannot sample from an empty buffer")
        return self.rng.integers(self.size, size=batch_size)

    def sample(self, batch_size: int, beta: float = 0.0) -> Batch:
        return self.gather(self.sample_indices(batch_size))


class PrioritizedReplayBuffer(ReplayBuffer):
    """Proportional prioritization: ``P(i) = p_i / sum_k p_k`` with ``p_i = min(rho_i, 1)^alpha``.

    New records enter with the largest priority seen so far (starting at, and
    clipped to, 1).  Every leaf is floored at ``min_priority`` so no record
    becomes unsampleable.
    """

    def __init__(self, capacity: int, alpha: float = 0.5, rng=None, min_priority: float = 1e-6):
        super().__init__(capacity, rng)
        self.alpha = float(alpha)
        self.min_priority = float(min_priority)
        self.tree = SumTree(capacity)
        self.max_priority = 1.0

    def leaf_value(self, rho) -> np.ndarray:
        rho = np.minimum(np.asarray(rho, dtype=np.float64), 1.0)
        return np.maximum(rho ** self.alpha, self.min_priority)

    def _on_push(self, slot, priority):
        rho = self.max_priority if priority is None else min(float(priority), 1.0)
        self.tree.update(slot, self.leaf_value(rho))

    def probabilities(self, idx=None) -> np.ndarray:
        leaves = self.tree.leaves[:self.size]
        p = leaves / self.tree.total
        return p if idx is None else p[idx]

    def sample(self, batch_size: int, beta: float = 0.4) -> Batch:
        if self.size == 0:
            raise BufferUnderfilledError("cannot sample from an empty buffer")
        if not 0.0 <= beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")
        total = self.tree.total
        seg = total / batch_size
        mass = (np.arange(batch_size) + self.rng.random(batch_size)) * seg
        idx = self.tree.find(np.minimum(mass, np.nextafter(total, 0.0)))
        probs = self.tree[idx] / total
        w = (1.0 / (self.size * probs)) ** beta
        w = w / w.max()
        return self.gather(idx, w, probs)

    def update_priorities(self, idx, rho) -> None:
        rho = np.asarray(rho, dtype=np.float64)
        if np.any(~np.isfinite(rho)) or np.any(rho < 0):
            raise ValueError("priorities must be finite and nonnegative")
        idx = np.asarray(idx)
        if np.any(idx >= self.size):
            raise IndexError("priority update for an empty slot")
        self.tree.update(idx, self.leaf_value(rho))
        if rho.size:
            self.max_priority = max(self.max_priority, float(min(rho.max(), 1.0)))

    def stats(self) -> dict:
        leaves = self.tree.leaves[:self.size]
        return {"size": self.size, "max_priority": self.max_priority,
                "mean_priority": float(leaves.mean()) if self.size else 0.0}
