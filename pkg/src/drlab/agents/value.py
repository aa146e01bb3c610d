"""Value-based agents.

One :class:`ValueAgent` covers DQN and all of its extensions; each
extension is a flag on :class:`ValueAgentConfig`.  Rainbow is simply the
configuration with every flag switched on, so with the flags off the very
same code path produces vanilla DQN.

Target construction per flag set:

* scalar head: ``y = r + (1 - done) gamma^n Q(s', a*; theta-)`` where ``a*``
  is the target net's own argmax, or the online net's (``double``), or the
  twin agent's target net (twin DQN);
* ``categorical``: the target row at ``a*`` is shifted to
  ``r + gamma^n z_i`` and projected back onto the support grid; plain c51
  picks ``a*`` with the target net, ``double`` with the online net;
* ``quantile``: target atoms ``r + (1 - done) gamma^n zeta_j(s', a*)``.

With noisy layers every pass draws fresh noise: online selection, target
evaluation and the training pass each get an independent draw.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ..nn import (AdamState, Head, Network, adam_step, kl_to_target, mlp_spec, mse,
                  quantile_regression, save_checkpoint)
from ..nn.losses import huber
from ..replay import NStepAssembler, PrioritizedReplayBuffer, ReplayBuffer, beta_schedule
from ..seeding import as_streams
from ..tabular.distributions import project_onto_grid, quantile_levels, support_grid


def epsilon_schedule(t, start: float = 1.0, end: float = 0.01, decay: float = 30_000) -> float:
    """``end + (start - end) exp(-t / decay)``."""
    return end + (start - end) * math.exp(-t / decay)


@dataclass
class ValueAgentConfig:
    gamma: float = 0.99
    batch_size: int = 128
    lr: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    hidden: tuple = (128, 128)
    loss: str = "mse"                       # mse | huber (scalar heads)
    target_network: bool = True
    target_update: int = 1000               # K, in training steps
    double: bool = False
    dueling: Optional[str] = None           # None | mean | max
    noisy: bool = False
    sigma_init: float = 0.5
    prioritized: bool = False
    alpha: float = 0.5
    beta0: float = 0.4
    t_beta: int = 100_000
    n_step: int = 1
    distributional: Optional[str] = None    # None | categorical | quantile
    num_atoms: int = 51
    v_min: float = -10.0
    v_max: float = 10.0
    eps_start: float = 1.0
    eps_end: float = 0.01
    eps_decay: float = 30_000
    warmup: int = 10_000
    capacity: int = 1_000_000

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.n_step < 1:
            raise ValueError("n_step must be >= 1")
        if self.target_update < 1:
            raise ValueError("target_update must be >= 1")
        if self.distributional not in (None, "categorical", "quantile"):
            raise ValueError(f"unknown distributional mode {self.distributional!r}")
        if self.distributional == "categorical" and not self.v_min < self.v_max:
            raise ValueError("categorical agents need v_min < v_max")
        if self.dueling not in (None, "mean", "max"):
            raise ValueError(f"unknown dueling mode {self.dueling!r}")
        if self.loss not in ("mse", "huber"):
            raise ValueError(f"unknown value loss {self.loss!r}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")


class ValueAgent:
    def __init__(self, config: ValueAgentConfig, state_dim: int, num_actions: int, rngs=0):
        self.cfg = cfg = config
        self.rngs = as_streams(rngs)
        self.num_actions = num_actions
        atoms = cfg.num_atoms if cfg.distributional else 1
        head = Head(cfg.distributional or "q", num_actions, atoms, cfg.dueling,
                    noisy=cfg.noisy, sigma_init=cfg.sigma_init)
        self.net = Network(mlp_spec(state_dim, cfg.hidden, head, noisy=cfg.noisy,
                                    sigma_init=cfg.sigma_init))
        self.params = self.net.init_params(self.rngs.get("net_init"))
        self.target = self.params.copy() if cfg.target_network else self.params
        self.opt = AdamState.like(self.params, lr=cfg.lr, beta1=cfg.adam_beta1,
                                  beta2=cfg.adam_beta2, eps=cfg.adam_eps)
        replay_rng = self.rngs.get("replay")
        if cfg.prioritized:
            self.buffer = PrioritizedReplayBuffer(cfg.capacity, cfg.alpha, replay_rng)
        else:
            self.buffer = ReplayBuffer(cfg.capacity, replay_rng)
        self.grid = support_grid(cfg.v_min, cfg.v_max, cfg.num_atoms) \
            if cfg.distributional == "categorical" else None
        self.taus = quantile_levels(cfg.num_atoms) if cfg.distributional == "quantile" else None
        self._noise_rng = self.rngs.get("noise")
        self._explore_rng = self.rngs.get("explore")
        self._assemblers = {}
        self.train_steps = 0
        self.selector = None   # optional callable next_states -> actions (twin DQN)

    # ------------------------------------------------------------ evaluation
    def noise(self):
        return self.net.sample_noise(self._noise_rng) if self.cfg.noisy else None

    def q_values(self, states, params=None, noise=None) -> np.ndarray:
        """Q estimates ``[B, A]``: the head mean for distributional agents."""
        out = self.net(self.params if params is None else params, states, noise)
        return self._means(out)

    def _means(self, out):
        if self.cfg.distributional == "categorical":
            return np.exp(out) @ self.grid
        if self.cfg.distributional == "quantile":
            return out.mean(axis=-1)
        return out

    def epsilon(self, t) -> float:
        if self.cfg.noisy:
            return 0.0
        return epsilon_schedule(t, self.cfg.eps_start, self.cfg.eps_end, self.cfg.eps_decay)

    def select_actions(self, states, t) -> np.ndarray:
        """Greedy (lowest index on ties) with epsilon exploration, or noisy greedy."""
        states = np.atleast_2d(states)
        greedy = np.argmax(self.q_values(states, noise=self.noise()), axis=1)
        eps = self.epsilon(t)
        if eps <= 0.0:
            return greedy
        rng = self._explore_rng
        explore = rng.random(len(states)) < eps
        random = rng.integers(self.num_actions, size=len(states))
        return np.where(explore, random, greedy)

    def select_action(self, state, t) -> int:
        return int(self.select_actions(np.asarray(state)[None], t)[0])

    # ---------------------------------------------------------------- storage
    def observe(self, transition, env_index: int = 0) -> None:
        asm = self._assemblers.get(env_index)
        if asm is None:
            asm = self._assemblers[env_index] = NStepAssembler(self.cfg.n_step, self.cfg.gamma)
        for rec in asm.push(transition):
            self.buffer.push(rec)

    def ready(self) -> bool:
        return len(self.buffer) >= max(self.cfg.warmup, self.cfg.batch_size)

    # ---------------------------------------------------------------- targets
    def compute_targets(self, batch, noise_select=None, noise_eval=None) -> np.ndarray:
        """Scalar targets ``[B]``, categorical target rows or quantile target atoms ``[B, N]``."""
        cfg = self.cfg
        B = len(batch)
        rows = np.arange(B)
        s2 = batch.next_states
        scale = np.where(batch.dones, 0.0, cfg.gamma ** batch.n_used.astype(np.float64))
        if self.selector is not None:
            a2 = np.asarray(self.selector(s2))
        elif cfg.double:
            a2 = np.argmax(self.q_values(s2, self.params, noise_select), axis=1)
        else:
            a2 = None
        out_t = self.net(self.target, s2, noise_eval)
        if a2 is None:
            a2 = np.argmax(self._means(out_t), axis=1)
        if cfg.distributional == "categorical":
            p = np.exp(out_t[rows, a2])
            atoms = batch.rewards[:, None] + scale[:, None] * self.grid[None, :]
            return project_onto_grid(atoms, p, self.grid)
        if cfg.distributional == "quantile":
            return batch.rewards[:, None] + scale[:, None] * out_t[rows, a2]
        return batch.rewards + scale * out_t[rows, a2]

    # --------------------------------------------------------------- training
    def loss_and_grads(self, batch, targets, noise=None):
        """Loss on ``batch`` against fixed ``targets``; gradients flow only through the online pass."""
        out, tape = self.net.forward(self.params, batch.states, noise)
        rows = np.arange(len(batch))
        a = batch.actions
        w = batch.weights
        g = np.zeros_like(out)
        kind = self.cfg.distributional
        if kind == "categorical":
            res = kl_to_target(out[rows, a], targets, w)
            prio = res.per_sample
        elif kind == "quantile":
            res = quantile_regression(out[rows, a], targets, w, self.taus)
            prio = res.per_sample
        else:
            fn = mse if self.cfg.loss == "mse" else huber
            res = fn(out[rows, a], targets, w)
            prio = np.abs(out[rows, a] - targets)
        g[rows, a] = res.grad
        return res, self.net.backward(tape, g), prio

    def train_step(self, step: int = 0) -> Optional[dict]:
        """One sampled gradient step; ``None`` while the buffer is below warm-up."""
        if not self.ready():
            return None
        cfg = self.cfg
        beta = beta_schedule(step, cfg.beta0, cfg.t_beta)
        batch = self.buffer.sample(cfg.batch_size, beta)
        n_sel = self.noise() if cfg.double and self.selector is None else None
        n_eval = self.noise()
        targets = self.compute_targets(batch, n_sel, n_eval)
        res, grads, prio = self.loss_and_grads(batch, targets, self.noise())
        adam_step(self.opt, self.params, grads)
        if cfg.prioritized:
            self.buffer.update_priorities(batch.indices, prio)
        self.train_steps += 1
        if cfg.target_network and self.train_steps % cfg.target_update == 0:
            self.target.assign(self.params)
        stats = {"loss": res.value, "mean_weight": float(np.mean(batch.weights))}
        if cfg.prioritized:
            stats["mean_priority"] = self.buffer.stats()["mean_priority"]
        if cfg.noisy:
            stats["noise_magnitude"] = self.noise_magnitude()
        return stats

    def noise_magnitude(self) -> float:
        sig = [self.params[f"{lin.name}.w_sigma"] for lin in self.net.noisy_layers]
        return float(np.mean(np.concatenate([np.abs(s).ravel() for s in sig]))) if sig else 0.0

    def save(self, path) -> None:
        save_checkpoint(self.params, path)


class TwinDQN:
    """Two independent DQN agents that evaluate each other's greedy choices.

    ``y_1 = r + gamma Q_1(s', argmax_a Q_2(s', a; theta_2-); theta_1-)`` and
    symmetrically for agent 2.  The agents never share replay memory; control
    of the environment alternates between them episode by episode and each
    agent stores only the transitions it generated.
    """

    def __init__(self, config: ValueAgentConfig, state_dim: int, num_actions: int, rngs=0):
        rngs = as_streams(rngs)
        cfg = replace(config, double=False)
        self.agents = [ValueAgent(cfg, state_dim, num_actions, rngs.child(f"twin{i}"))
                       for i in range(2)]
        a0, a1 = self.agents
        a0.selector = lambda s: np.argmax(a1.q_values(s, a1.target), axis=1)
        a1.selector = lambda s: np.argmax(a0.q_values(s, a0.target), axis=1)
        self._active = {}
        self.cfg = cfg

    @property
    def params(self):
        return self.agents[0].params

    def controller(self, env_index: int = 0) -> int:
        return self._active.get(env_index, env_index % 2)

    def select_actions(self, states, t) -> np.ndarray:
        states = np.atleast_2d(states)
        out = np.zeros(len(states), dtype=np.int64)
        for i in range(len(states)):
            out[i] = self.agents[self.controller(i)].select_actions(states[i:i + 1], t)[0]
        return out

    def select_action(self, state, t) -> int:
        return int(self.select_actions(np.asarray(state)[None], t)[0])

    def epsilon(self, t) -> float:
        return self.agents[0].epsilon(t)

    def observe(self, transition, env_index: int = 0) -> None:
        who = self.controller(env_index)
        self.agents[who].observe(transition, env_index)
        if transition.done:
            self._active[env_index] = 1 - who

    def train_step(self, step: int = 0) -> Optional[dict]:
        stats = [a.train_step(step) for a in self.agents]
        stats = [s for s in stats if s is not None]
        if not stats:
            return None
        return {"loss": float(np.mean([s["loss"] for s in stats])),
                "mean_weight": float(np.mean([s["mean_weight"] for s in stats]))}

    def save(self, path) -> None:
        save_checkpoint(self.agents[0].params, path)
        save_checkpoint(self.agents[1].params, f"{path}.twin")
