"""Lock-step stepping of several environment instances."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence

import numpy as np

from .core import Transition
from .envs import Env


def _advance(env: Env, action) -> Transition:
    if env.needs_reset:
        env.reset()
    return env.step(action)


def vector_step(envs: Sequence[Env], actions: Sequence[int],
                pool: Optional[ThreadPoolExecutor] = None) -> list:
    """Step every env once; terminated (or never started) envs reset first.

    Results are returned in env order regardless of whether a worker pool is
    used.
    """
    if len(actions) != len(envs):
        raise ValueError(f"got {len(actions)} actions for {len(envs)} envs")
    if pool is None:
        return [_advance(e, a) for e, a in zip(envs, actions)]
    return list(pool.map(_advance, envs, actions))


class VectorEnv:
    """Envs that reset eagerly after ``done`` so ``states`` is always actionable."""

    def __init__(self, envs: Sequence[Env], threads: int = 1):
        self.envs = list(envs)
        self._pool = ThreadPoolExecutor(threads) if threads > 1 else None
        self.states = np.stack([e.reset() for e in self.envs])

    def __len__(self):
        return len(self.envs)

    def step(self, actions) -> list:
        transitions = vector_step(self.envs, actions, self._pool)
        for i, (env, t) in enumerate(zip(self.envs, transitions)):
            self.states[i] = env.reset() if t.done else t.next_state
        return transitions

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None
