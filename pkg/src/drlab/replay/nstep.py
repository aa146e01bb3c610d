"""Assembly of N-step records from a stream of transitions."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, List

import numpy as np


@dataclass
class NStepRecord:
    """``(s, a, sum_k gamma^k r_{k+1}, s^(n), done)`` with the bootstrap exponent ``n_used``."""

    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    done: bool
    n_used: int = 1

    def bootstrap_discount(self, gamma: float) -> float:
        return gamma ** self.n_used


class NStepAssembler:
    """Sliding window over one environment's transitions.

    Each visited state produces exactly one record.  A record is emitted as
    soon as its window holds ``n`` transitions, or, when the episode ends,
    every pending window is flushed with ``n_used < n`` and ``done=True``.
    """

    def __init__(self, n: int, gamma: float):
        if n < 1:
            raise ValueError("n must be >= 1")
        self.n, self.gamma = int(n), float(gamma)
        self._window = deque()

    def __len__(self):
        return len(self._window)

    def _emit(self, length: int) -> NStepRecord:
        items = list(self._window)[:length]
        reward = 0.0
        for k, t in enumerate(items):
            reward += self.gamma ** k * t.reward
        last = items[-1]
        first = items[0]
        return NStepRecord(first.state, first.action, reward, last.next_state, last.done, length)

    def push(self, t) -> List[NStepRecord]:
        self._window.append(t)
        out = []
        if t.done:
            while self._window:
                out.append(self._emit(len(self._window)))
                self._window.popleft()
        elif len(self._window) == self.n:
            out.append(self._emit(self.n))
            self._window.popleft()
        return out

    def reset(self) -> None:
        """Drop unfinished windows (their bootstrap state is unknown)."""
        self._window.clear()


def assemble_nstep(transitions: Iterable, n: int, gamma: float) -> List[NStepRecord]:
    asm = NStepAssembler(n, gamma)
    out = []
    for t in transitions:
        out.extend(asm.push(t))
    return out
