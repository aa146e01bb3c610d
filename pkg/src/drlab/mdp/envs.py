"""Built-in environments: classic cart-pole and wrappers around tabular MDPs."""
from __future__ import annotations

import math
import re
from typing import Optional

import numpy as np

from .core import MdpSpec, Transition
from .tabular import TabularMDP, chain, cliff, gridworld


class EpisodeTerminatedError(RuntimeError):
    """Raised when stepping an environment whose episode has ended."""


class Env:
    """Seeded episodic environment.

    Subclasses implement ``_reset_state`` and ``_advance``.  The episode step
    counter, the truncation rule and the terminated-episode contract live
    here.
    """

    env_id = "env"

    def __init__(self, spec: MdpSpec, seed: int = 0):
        self.spec = spec
        self.seed(seed)

    def seed(self, seed: int) -> None:
        self.rng_seed = int(seed)
        self.rng = np.random.default_rng(self.rng_seed)
        self._state = None
        self._t = 0
        self._done = True

    @property
    def needs_reset(self) -> bool:
        return self._done

    @property
    def elapsed_steps(self) -> int:
        return self._t

    @property
    def state(self) -> np.ndarray:
        return self._observe()

    def reset(self) -> np.ndarray:
        self._reset_state()
        self._t = 0
        self._done = False
        return self._observe()

    def step(self, action: int) -> Transition:
        if self._done:
            raise EpisodeTerminatedError(f"{self.env_id}: step() on a terminated episode")
        action = int(action)
        if not 0 <= action < self.spec.action_count:
            raise ValueError(f"action {action} out of range")
        s = self._observe()
        reward, terminal = self._advance(action)
        self._t += 1
        limit = self.spec.max_episode_len
        done = bool(terminal or (limit is not None and self._t >= limit))
        self._done = done
        return Transition(s, action, float(reward), self._observe(), done)

    def _observe(self) -> np.ndarray:
        raise NotImplementedError

    def _reset_state(self) -> None:
        raise NotImplementedError

    def _advance(self, action: int):
        raise NotImplementedError


class CartPole(Env):
    """Classic cart-pole balancing with Euler integration.

    Reward is +1 on every tick, including the one that ends the episode, so
    the return equals the episode length (capped at ``max_episode_len``).
    """

    env_id = "cartpole"

    gravity = 9.8
    masscart = 1.0
    masspole = 0.1
    length = 0.5  # half the pole length
    force_mag = 10.0
    tau = 0.02
    theta_threshold = 12 * 2 * math.pi / 360
    x_threshold = 2.4
    init_range = 0.05

    def __init__(self, seed: int = 0, max_episode_len: int = 200, gamma: float = 0.99):
        super().__init__(MdpSpec(4, 2, gamma, max_episode_len), seed)

    def _observe(self):
        return np.array(self._state, dtype=np.float64)

    def _reset_state(self):
        self._state = self.rng.uniform(-self.init_range, self.init_range, size=4)

    def _advance(self, action):
        x, x_dot, theta, theta_dot = self._state
        force = self.force_mag if action == 1 else -self.force_mag
        costheta = math.cos(theta)
        sintheta = math.sin(theta)
        total_mass = self.masspole + self.masscart
        polemass_length = self.masspole * self.length
        temp = (force + polemass_length * theta_dot ** 2 * sintheta) / total_mass
        thetaacc = (self.gravity * sintheta - costheta * temp) / (
            self.length * (4.0 / 3.0 - self.masspole * costheta ** 2 / total_mass))
        xacc = temp - polemass_length * thetaacc * costheta / total_mass
        x = x + self.tau * x_dot
        x_dot = x_dot + self.tau * xacc
        theta = theta + self.tau * theta_dot
        theta_dot = theta_dot + self.tau * thetaacc
        self._state = np.array([x, x_dot, theta, theta_dot])
        terminal = (x < -self.x_threshold or x > self.x_threshold
                    or theta < -self.theta_threshold or theta > self.theta_threshold)
        return 1.0, terminal


class TabularEnv(Env):
    """Sampling wrapper around a :class:`TabularMDP`; states are one-hot."""

    def __init__(self, mdp: TabularMDP, seed: int = 0, max_episode_len: Optional[int] = 100):
        self.mdp = mdp
        self.env_id = mdp.name
        self._cum = np.cumsum(mdp.P, axis=2)
        super().__init__(MdpSpec(mdp.num_states, mdp.num_actions, mdp.gamma, max_episode_len), seed)

    @property
    def state_index(self) -> int:
        return self._state

    def _observe(self):
        v = np.zeros(self.mdp.num_states)
        if self._state is not None:
            v[self._state] = 1.0
        return v

    def _reset_state(self):
        self._state = self.mdp.start

    def _advance(self, action):
        u = self.rng.random()
        row = self._cum[self._state, action]
        s2 = int(min(np.searchsorted(row, u, side="right"), row.size - 1))
        self._state = s2
        return self.mdp.rewards[s2], bool(self.mdp.terminal[s2])


_ID = re.compile(r"^\s*([a-z_]+)\s*(?:[(:]\s*([0-9,x ]*)\s*\)?)?\s*$")


def parse_env_id(env_id: str):
    """Split ``"gridworld(4,4)"`` / ``"chain:5"`` into ``("gridworld", [4, 4])``."""
    m = _ID.match(env_id.lower())
    if not m:
        raise ValueError(f"unrecognised env id {env_id!r}")
    name, args = m.group(1), m.group(2)
    nums = [int(a) for a in re.split(r"[,x ]+", args) if a] if args else []
    return name, nums


def make_tabular(env_id: str, gamma: float = 0.9) -> TabularMDP:
    name, args = parse_env_id(env_id)
    if name == "chain":
        return chain(*(args or [5]), gamma=gamma)
    if name == "gridworld":
        return gridworld(*(args or [4, 4]), gamma=gamma)
    if name == "cliff":
        return cliff(*(args or [12, 4]), gamma=gamma)
    raise ValueError(f"{env_id!r} is not a tabular environment")


def make_env(env_id: str, seed: int = 0, gamma: Optional[float] = None,
             max_episode_len: Optional[int] = None) -> Env:
    """Build an environment from its string id.

    Known ids: ``cartpole``, ``chain(n)``, ``gridworld(w,h)``, ``cliff`` /
    ``cliff(w,h)``.
    """
    name, _ = parse_env_id(env_id)
    if name == "cartpole":
        return CartPole(seed, max_episode_len or 200, 0.99 if gamma is None else gamma)
    mdp = make_tabular(env_id, 0.9 if gamma is None else gamma)
    return TabularEnv(mdp, seed, max_episode_len or 100)


def max_return(env_id: str) -> Optional[float]:
    """Highest achievable undiscounted episode return, where it is known."""
    name, args = parse_env_id(env_id)
    if name == "cartpole":
        return 200.0
    if name in ("chain", "gridworld"):
        return 1.0
    if name == "cliff":
        w = args[0] if args else 12
        return -float(w + 1)
    return None
