"""Policy-gradient agents: REINFORCE, A2C, PPO and TRPO.

A2C and PPO use one network with a shared trunk and two heads (softmax
policy, scalar value).  TRPO keeps the policy and the critic in separate
networks so that the trust-region step touches policy weights only.

Rollouts are stamped with the parameter version that generated them and an
update refuses a rollout from any other version.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ..nn import (AdamState, Head, Network, adam_step, clipped_ppo, entropy, mlp_spec,
                  save_checkpoint)
from ..nn.network import log_softmax
from ..seeding import as_streams


class StaleRolloutError(RuntimeError):
    """Raised when an on-policy update receives data from older parameters."""


@dataclass
class PgConfig:
    gamma: float = 0.99
    lam: float = 0.95
    rollout: int = 40              # steps per env per update
    num_envs: int = 8
    batch_size: int = 32           # PPO mini-batch
    epochs: int = 3                # PPO passes per rollout
    clip: float = 0.1
    entropy_weight: float = 0.01
    critic_weight: float = 0.5
    lr: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    hidden: tuple = (128, 128)
    baseline: str = "none"         # REINFORCE: none | constant_optimal | value
    # TRPO
    delta: float = 0.01
    cg_iters: int = 10
    cg_tol: float = 1e-10
    damping: float = 1e-3
    backtrack: float = 0.5
    max_backtracks: int = 10
    fvp: str = "exact"             # exact | fd
    critic_lr: float = 1e-3
    critic_iters: int = 20

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if not 0.0 < self.clip < 1.0 and not np.isinf(self.clip):
            raise ValueError("clip must lie in (0, 1)")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lam must lie in [0, 1]")
        if self.delta <= 0 or self.damping < 0:
            raise ValueError("need delta > 0 and damping >= 0")
        if self.baseline not in ("none", "constant_optimal", "value"):
            raise ValueError(f"unknown baseline {self.baseline!r}")
        if self.fvp not in ("exact", "fd"):
            raise ValueError(f"unknown fvp mode {self.fvp!r}")


# --------------------------------------------------------------------- GAE

def gae_advantages(rewards, values, next_values, dones, gamma: float, lam: float) -> np.ndarray:
    """Advantages for one environment's rollout column.

    ``next_values[t]`` is ``V(s_{t+1})`` (ignored where ``dones[t]``).  A
    stretch that ends in ``done`` gets the ordinary exponentially weighted
    sum ``sum_l (gamma lam)^l delta_{t+l}``: every longer estimator equals
    the full return there.  A stretch cut off by the rollout end averages
    only the ``n`` available k-step estimators with weights ``lam^(k-1)``
    normalised by ``1 + lam + ... + lam^(n-1)``.
    """
    r = np.asarray(rewards, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    nv = np.where(dones, 0.0, np.asarray(next_values, dtype=np.float64))
    d = np.asarray(dones, dtype=bool)
    T = r.size
    delta = r + gamma * nv - v
    adv = np.zeros(T)
    end = T - 1
    for t in range(T - 1, -1, -1):
        if d[t]:
            end = t
        n = end - t + 1
        seg = delta[t:end + 1]
        disc = gamma ** np.arange(n)
        if d[end]:
            adv[t] = np.dot((gamma * lam) ** np.arange(n), seg)
        else:
            adv[t] = np.dot(disc * _trunc_weights(lam, n), seg)
    return adv


def _trunc_weights(lam: float, n: int) -> np.ndarray:
    """Weight of ``delta_{t+l}`` in the normalised truncated ensemble of ``n`` estimators."""
    l = np.arange(n)
    if lam >= 1.0:
        return (n - l) / n
    if lam <= 0.0:
        return (l == 0).astype(np.float64)
    return (lam ** l - lam ** n) / (1.0 - lam ** n)


# ------------------------------------------------------------------ rollouts

@dataclass
class RolloutBatch:
    """On-policy data laid out ``[T, E]`` (time, environment)."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    logp_old: np.ndarray
    values: np.ndarray
    next_values: np.ndarray
    version: int
    advantages: Optional[np.ndarray] = None
    returns: Optional[np.ndarray] = None

    def __post_init__(self):
        self.logp_old = np.array(self.logp_old, dtype=np.float64)
        self.logp_old.setflags(write=False)

    @property
    def size(self) -> int:
        return self.actions.size

    def flat(self, name):
        a = getattr(self, name)
        return a.reshape(self.size, *a.shape[2:])


def compute_gae(rollout: RolloutBatch, gamma: float, lam: float) -> RolloutBatch:
    """Fill ``advantages`` and ``returns = advantages + values``, column by column."""
    T, E = rollout.actions.shape
    adv = np.zeros((T, E))
    for e in range(E):
        adv[:, e] = gae_advantages(rollout.rewards[:, e], rollout.values[:, e],
                                   rollout.next_values[:, e], rollout.dones[:, e], gamma, lam)
    rollout.advantages = adv
    rollout.returns = adv + rollout.values
    return rollout


# ---------------------------------------------------------------- REINFORCE

def reinforce_gradient(episodes, score_fn: Callable, gamma: float, baseline: str = "none",
                       value_fn: Optional[Callable] = None, weights: Optional[Sequence] = None):
    """``(1/N) sum_traj sum_t gamma^t grad log pi(a_t|s_t) (G_t - b)``.

    ``episodes`` is a list of ``[(s, a, r), ...]``; ``score_fn(s, a)``
    returns ``grad log pi(a|s)`` as an array.  ``weights`` (e.g. exact
    trajectory probabilities) replace the uniform ``1/N``.  Baselines:
    ``none``; ``constant_optimal``, the state-independent
    ``sum gamma^t |score|^2 G_t / sum |score|^2``; ``value``, ``value_fn(s)``.
    """
    N = len(episodes)
    w = np.full(N, 1.0 / N) if weights is None else np.asarray(weights, dtype=np.float64)
    per_episode = []
    for ep in episodes:
        rewards = np.array([r for _, _, r in ep], dtype=np.float64)
        G = np.zeros_like(rewards)
        acc = 0.0
        for t in range(len(rewards) - 1, -1, -1):
            acc = rewards[t] + gamma * acc
            G[t] = acc
        scores = [np.asarray(score_fn(s, a), dtype=np.float64) for s, a, _ in ep]
        per_episode.append((G, scores))
    if baseline == "constant_optimal":
        num = den = 0.0
        for wi, (G, scores) in zip(w, per_episode):
            for t, sc in enumerate(scores):
                sq = float(np.sum(sc * sc))
                num += wi * gamma ** t * sq * G[t]
                den += wi * sq
        b_const = num / den if den > 0 else 0.0
    grad = None
    for wi, ep, (G, scores) in zip(w, episodes, per_episode):
        for t, ((s, _, _), sc) in enumerate(zip(ep, scores)):
            if baseline == "none":
                b = 0.0
            elif baseline == "constant_optimal":
                b = b_const
            elif baseline == "value":
                b = float(value_fn(s))
            else:
                b = float(baseline)
            term = wi * gamma ** t * (G[t] - b) * sc
            grad = term if grad is None else grad + term
    return grad


# ----------------------------------------------------------- conjugate grad

def conjugate_gradient(Avp: Callable, b: np.ndarray, iters: int = 10, tol: float = 1e-10):
    """Solve ``A x = b`` for SPD ``A`` given as a product; returns ``(x, residual_norm, iters)``."""
    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rr = float(r @ r)
    k = 0
    while k < iters and np.sqrt(rr) > tol:
        Ap = Avp(p)
        alpha = rr / float(p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        rr_new = float(r @ r)
        p = r + (rr_new / rr) * p
        rr = rr_new
        k += 1
    return x, float(np.sqrt(rr)), k


# -------------------------------------------------------------- base agent

class _OnPolicyAgent:
    """Shared rollout collection for the network-based policy-gradient agents."""

    def __init__(self, config: PgConfig, rngs):
        self.cfg = config
        self.rngs = as_streams(rngs)
        self._act_rng = self.rngs.get("explore")
        self._shuffle_rng = self.rngs.get("shuffle")
        self.version = 0
        self.updates = 0

    def policy_value(self, states):
        raise NotImplementedError

    def act(self, states):
        logp, values = self.policy_value(states)
        p = np.exp(logp)
        u = self._act_rng.random(len(p))
        actions = np.minimum((np.cumsum(p, axis=1) < u[:, None]).sum(axis=1), p.shape[1] - 1)
        return actions, logp[np.arange(len(p)), actions], values

    def select_actions(self, states, t=0):
        return self.act(np.atleast_2d(states))[0]

    def collect(self, venv, T: int, on_transition=None) -> RolloutBatch:
        """Step every env of ``venv`` ``T`` times under the current parameters."""
        E = len(venv)
        d = venv.states.shape[1]
        S = np.zeros((T, E, d))
        A = np.zeros((T, E), dtype=np.int64)
        R = np.zeros((T, E))
        D = np.zeros((T, E), dtype=bool)
        LP = np.zeros((T, E))
        V = np.zeros((T, E))
        NV = np.zeros((T, E))
        for t in range(T):
            S[t] = venv.states
            a, lp, v = self.act(S[t])
            trans = venv.step(a)
            A[t], LP[t], V[t] = a, lp, v
            for e, tr in enumerate(trans):
                R[t, e] = tr.reward
                D[t, e] = tr.done
                if on_transition is not None:
                    on_transition(e, tr)
        # V(s_{t+1}) is the value already computed for the next row unless the episode ended
        NV[:-1] = V[1:]
        _, last_v = self.policy_value(venv.states)
        NV[-1] = last_v
        NV[D] = 0.0
        return RolloutBatch(S, A, R, D, LP, V, NV, self.version)

    def _check_fresh(self, rollout: RolloutBatch):
        if rollout.version != self.version:
            raise StaleRolloutError(
                f"rollout from parameter version {rollout.version}, current is {self.version}")


# ------------------------------------------------------------- actor-critic

class ActorCritic(_OnPolicyAgent):
    """Shared-trunk actor-critic used by A2C and PPO."""

    def __init__(self, config: PgConfig, state_dim: int, num_actions: int, rngs=0):
        super().__init__(config, rngs)
        self.num_actions = num_actions
        self.net = Network(mlp_spec(state_dim, config.hidden, Head("actor_critic", num_actions)))
        self.params = self.net.init_params(self.rngs.get("net_init"))
        self.opt = AdamState.like(self.params, lr=config.lr, beta1=config.adam_beta1,
                                  beta2=config.adam_beta2, eps=config.adam_eps)

    def policy_value(self, states):
        return self.net(self.params, states)

    def _grads(self, states, actions, adv, returns, logp_old=None, clip=None):
        """Combined loss and gradients on a flat batch.

        With ``logp_old`` the actor term is the clipped surrogate; without it,
        the plain ``-mean(log pi(a|s) A)``.
        """
        cfg = self.cfg
        (logp, v), tape = self.net.forward(self.params, states)
        B = len(actions)
        rows = np.arange(B)
        g_logp = np.zeros_like(logp)
        if logp_old is None:
            actor = -float(np.mean(logp[rows, actions] * adv))
            g_logp[rows, actions] = -adv / B
            ratio = np.ones(B)
        else:
            res = clipped_ppo(logp[rows, actions], logp_old, adv, clip)
            actor = res.value
            g_logp[rows, actions] = res.grad
            ratio = np.exp(logp[rows, actions] - logp_old)
        ent = entropy(logp)
        g_logp -= cfg.entropy_weight * ent.grad
        diff = v - returns
        critic = float(np.mean(diff ** 2))
        g_v = cfg.critic_weight * 2.0 * diff / B
        grads = self.net.backward(tape, (g_logp, g_v))
        stats = {"actor_loss": actor, "critic_loss": critic, "entropy": ent.value,
                 "loss": actor + cfg.critic_weight * critic - cfg.entropy_weight * ent.value,
                 "mean_ratio": float(ratio.mean())}
        return stats, grads

    def a2c_gradient(self, rollout: RolloutBatch):
        return self._grads(rollout.flat("states"), rollout.flat("actions"),
                           rollout.flat("advantages"), rollout.flat("returns"))

    def a2c_step(self, rollout: RolloutBatch) -> dict:
        self._check_fresh(rollout)
        compute_gae(rollout, self.cfg.gamma, self.cfg.lam)
        stats, grads = self.a2c_gradient(rollout)
        adam_step(self.opt, self.params, grads)
        self.version += 1
        self.updates += 1
        return stats

    def ppo_gradient(self, rollout: RolloutBatch, idx=None, clip=None):
        idx = np.arange(rollout.size) if idx is None else idx
        return self._grads(rollout.flat("states")[idx], rollout.flat("actions")[idx],
                           rollout.flat("advantages")[idx], rollout.flat("returns")[idx],
                           rollout.flat("logp_old")[idx], self.cfg.clip if clip is None else clip)

    def ppo_step(self, rollout: RolloutBatch) -> dict:
        self._check_fresh(rollout)
        cfg = self.cfg
        compute_gae(rollout, cfg.gamma, cfg.lam)
        n = rollout.size
        log = []
        for _ in range(cfg.epochs):
            order = self._shuffle_rng.permutation(n)
            for start in range(0, n, cfg.batch_size):
                stats, grads = self.ppo_gradient(rollout, order[start:start + cfg.batch_size])
                adam_step(self.opt, self.params, grads)
                self.updates += 1
                log.append(stats)
        self.version += 1
        return {k: float(np.mean([s[k] for s in log])) for k in log[0]}

    def save(self, path):
        save_checkpoint(self.params, path)


# ---------------------------------------------------------------- REINFORCE

class Reinforce(_OnPolicyAgent):
    """Monte-Carlo policy gradient on complete episodes from a single env.

    ``baseline='value'`` trains a separate critic on the observed returns.
    """

    def __init__(self, config: PgConfig, state_dim: int, num_actions: int, rngs=0):
        super().__init__(config, rngs)
        self.net = Network(mlp_spec(state_dim, config.hidden, Head("policy", num_actions)))
        self.critic = Network(mlp_spec(state_dim, config.hidden, Head("value")))
        init = self.rngs.get("net_init")
        self.params = self.net.init_params(init)
        self.critic_params = self.critic.init_params(init)
        self.opt = AdamState.like(self.params, lr=config.lr)
        self.critic_opt = AdamState.like(self.critic_params, lr=config.critic_lr)

    def policy_value(self, states):
        states = np.atleast_2d(states)
        return self.net(self.params, states), self.critic(self.critic_params, states)

    def update(self, episodes) -> dict:
        """``episodes``: list of ``(states [T, d], actions [T], rewards [T])``."""
        cfg = self.cfg
        S = np.concatenate([e[0] for e in episodes])
        A = np.concatenate([e[1] for e in episodes])
        G, disc = [], []
        for _, _, r in episodes:
            g = np.zeros(len(r))
            acc = 0.0
            for t in range(len(r) - 1, -1, -1):
                acc = r[t] + cfg.gamma * acc
                g[t] = acc
            G.append(g)
            disc.append(cfg.gamma ** np.arange(len(r)))
        G, disc = np.concatenate(G), np.concatenate(disc)
        logp, tape = self.net.forward(self.params, S)
        rows = np.arange(len(A))
        if cfg.baseline == "value":
            v, ctape = self.critic.forward(self.critic_params, S)
            b = v
            adam_step(self.critic_opt, self.critic_params,
                      self.critic.backward(ctape, 2.0 * (v - G) / len(G)))
        elif cfg.baseline == "constant_optimal":
            p = np.exp(logp)
            # squared score norm taken in logit space: |e_a - p|^2
            sq = np.sum(p ** 2, axis=1) - 2 * p[rows, A] + 1.0
            b = np.sum(disc * sq * G) / np.sum(sq)
        else:
            b = 0.0
        g = np.zeros_like(logp)
        g[rows, A] = -disc * (G - b) / len(episodes)
        adam_step(self.opt, self.params, self.net.backward(tape, g))
        self.version += 1
        self.updates += 1
        return {"loss": float(-np.sum(disc * (G - b) * logp[rows, A]) / len(episodes))}

    def save(self, path):
        save_checkpoint(self.params, path)


# --------------------------------------------------------------------- TRPO

@dataclass
class TrpoReport:
    accepted: bool
    cg_residual: float
    cg_iters: int
    final_kl: float
    improvement: float
    backtracks: int
    step_norm: float = 0.0


class Trpo(_OnPolicyAgent):
    """Trust-region policy optimisation with a separate critic."""

    def __init__(self, config: PgConfig, state_dim: int, num_actions: int, rngs=0):
        super().__init__(config, rngs)
        self.net = Network(mlp_spec(state_dim, config.hidden, Head("policy", num_actions)))
        self.critic = Network(mlp_spec(state_dim, config.hidden, Head("value")))
        init = self.rngs.get("net_init")
        self.params = self.net.init_params(init)
        self.critic_params = self.critic.init_params(init)
        self.critic_opt = AdamState.like(self.critic_params, lr=config.critic_lr)

    def policy_value(self, states):
        states = np.atleast_2d(states)
        return self.net(self.params, states), self.critic(self.critic_params, states)

    # pieces exposed for testing
    def surrogate(self, flat_params, states, actions, logp_old, adv) -> float:
        logp = self.net(self.params.unflatten(flat_params), states)
        r = np.exp(logp[np.arange(len(actions)), actions] - logp_old)
        return float(np.mean(r * adv))

    def surrogate_gradient(self, states, actions, adv) -> np.ndarray:
        """``grad L`` at the old parameters, i.e. ``mean grad log pi(a|s) A``."""
        logp, tape = self.net.forward(self.params, states)
        g = np.zeros_like(logp)
        g[np.arange(len(actions)), actions] = adv / len(actions)
        return self.net.backward(tape, g).flatten()

    def mean_kl(self, flat_params, states, p_old) -> float:
        logp = self.net(self.params.unflatten(flat_params), states)
        with np.errstate(divide="ignore", invalid="ignore"):
            lo = np.where(p_old > 0, np.log(np.where(p_old > 0, p_old, 1.0)), 0.0)
        return float(np.mean(np.sum(p_old * (lo - logp), axis=1)))

    def fisher_vector_product(self, states, v: np.ndarray, damping: Optional[float] = None,
                              mode: Optional[str] = None) -> np.ndarray:
        """``(F + damping I) v`` with ``F`` the mean Fisher matrix (= KL Hessian) over ``states``.

        ``exact``: ``F v = mean J^T diag(p) J v`` with ``J`` the Jacobian of the
        log-probabilities, using one forward-mode and one reverse pass.
        ``fd``: central difference of the KL gradient along ``v``.
        """
        damping = self.cfg.damping if damping is None else damping
        mode = self.cfg.fvp if mode is None else mode
        B = len(states)
        if mode == "exact":
            logp, dlogp = self.net.jvp(self.params, states, self.params.unflatten(v))
            p = np.exp(logp)
            _, tape = self.net.forward(self.params, states)
            Fv = self.net.backward(tape, p * dlogp / B).flatten()
        else:
            theta = self.params.flatten()
            p_old = np.exp(self.net(self.params, states))
            h = 1e-4 / max(np.linalg.norm(v), 1e-12)

            def kl_grad(flat):
                logp, tape = self.net.forward(self.params.unflatten(flat), states)
                return self.net.backward(tape, -p_old / B).flatten()

            Fv = (kl_grad(theta + h * v) - kl_grad(theta - h * v)) / (2 * h)
        return Fv + damping * v

    def trpo_step(self, rollout: RolloutBatch) -> TrpoReport:
        self._check_fresh(rollout)
        cfg = self.cfg
        compute_gae(rollout, cfg.gamma, cfg.lam)
        S, A = rollout.flat("states"), rollout.flat("actions")
        adv, lp_old = rollout.flat("advantages"), rollout.flat("logp_old")
        theta = self.params.flatten()
        g = self.surrogate_gradient(S, A, adv)
        p_old = np.exp(self.net(self.params, S))
        report = TrpoReport(True, 0.0, 0, 0.0, 0.0, 0)
        if np.any(g != 0.0):
            x, res, iters = conjugate_gradient(lambda v: self.fisher_vector_product(S, v), g,
                                               cfg.cg_iters, cfg.cg_tol)
            xFx = float(x @ self.fisher_vector_product(S, x))
            report.cg_residual, report.cg_iters = res, iters
            if xFx > 0:
                full = np.sqrt(2.0 * cfg.delta / xFx) * x
                base = float(np.mean(adv))
                report.accepted = False
                for k in range(cfg.max_backtracks):
                    cand = theta + cfg.backtrack ** k * full
                    kl = self.mean_kl(cand, S, p_old)
                    imp = self.surrogate(cand, S, A, lp_old, adv) - base
                    if kl <= cfg.delta and imp >= 0:
                        self.params.assign_flat(cand)
                        report.accepted = True
                        report.final_kl, report.improvement = kl, imp
                        report.step_norm = float(np.linalg.norm(cand - theta))
                        break
                    report.backtracks = k + 1
        self._fit_critic(S, rollout.flat("returns"))
        self.version += 1
        self.updates += 1
        return report

    def _fit_critic(self, states, returns):
        B = len(states)
        for _ in range(self.cfg.critic_iters):
            idx = self._shuffle_rng.permutation(B)[:max(self.cfg.batch_size, 1)]
            v, tape = self.critic.forward(self.critic_params, states[idx])
            adam_step(self.critic_opt, self.critic_params,
                      self.critic.backward(tape, 2.0 * (v - returns[idx]) / len(idx)))

    def save(self, path):
        save_checkpoint(self.params, path)


# ------------------------------------------------- natural-gradient toy check

def _softmax3(theta):
    """Three-action softmax with logits ``(theta_0, theta_1, 0)``."""
    return np.exp(log_softmax(np.array([theta[0], theta[1], 0.0])))


def fisher_softmax3(theta) -> np.ndarray:
    """Fisher matrix of the toy family by enumeration of the three outcomes."""
    p = _softmax3(theta)
    F = np.zeros((2, 2))
    for a in range(3):
        s = -p[:2].copy()
        if a < 2:
            s[a] += 1.0
        F += p[a] * np.outer(s, s)
    return F


def _fd_jacobian(fn, x, h=1e-6):
    x = np.asarray(x, dtype=np.float64)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((np.asarray(fn(x + e)) - np.asarray(fn(x - e))) / (2 * h))
    return np.stack(cols, axis=-1)


def natural_gradient_invariance_check(nu, reparam: Callable, rewards=(1.0, -0.5, 0.25)) -> dict:
    """Compare the two parametrisations ``theta`` and ``nu`` with ``theta = reparam(nu)``.

    The nu-side Fisher is assembled independently (scores of ``log pi(theta(nu))``
    by finite differences in ``nu``) and compared with ``J^T F_theta J``.  For
    the objective ``sum_a pi_a c_a`` the natural steps, mapped to theta-space
    by ``J``, should agree; plain-gradient steps generally do not.
    """
    nu = np.asarray(nu, dtype=np.float64)
    c = np.asarray(rewards, dtype=np.float64)
    theta = np.asarray(reparam(nu), dtype=np.float64)
    J = _fd_jacobian(reparam, nu)
    F_theta = fisher_softmax3(theta)
    logpi_nu = lambda n: np.log(_softmax3(reparam(n)))
    scores_nu = _fd_jacobian(logpi_nu, nu)          # [3, dim nu]
    p = _softmax3(theta)
    F_nu = (scores_nu * p[:, None]).T @ scores_nu
    s_theta = np.stack([np.eye(3)[a][:2] - p[:2] for a in range(3)])
    grad_theta = (p * c) @ s_theta
    grad_nu = (p * c) @ scores_nu
    nat_theta = np.linalg.solve(F_theta, grad_theta)
    nat_nu_mapped = J @ np.linalg.solve(F_nu, grad_nu)
    plain_mapped = J @ grad_nu
    return {
        "fisher_error": float(np.max(np.abs(F_nu - J.T @ F_theta @ J))),
        "natural_step_error": float(np.max(np.abs(nat_nu_mapped - nat_theta))),
        "plain_step_gap": float(np.max(np.abs(plain_mapped - grad_theta))),
        "F_theta": F_theta, "F_nu": F_nu, "J": J,
    }
