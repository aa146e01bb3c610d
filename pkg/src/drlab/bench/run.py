"""Seeded training runs that log one CSV row per finished episode."""
from __future__ import annotations

import csv
import os
import time

import numpy as np

from ..agents.pg import ActorCritic, Reinforce, Trpo
from ..agents.value import TwinDQN, ValueAgent
from ..mdp.envs import make_env
from ..mdp.vector import VectorEnv, vector_step
from ..seeding import RngStreams
from .config import RunConfig

BASE_COLUMNS = ["wall_ms", "env_step", "episode", "episode_return", "episode_length", "loss",
                "updates", "updates_per_interaction"]
VALUE_COLUMNS = ["epsilon", "mean_priority", "noise_magnitude"]
TRPO_COLUMNS = ["kl", "improvement", "cg_iters", "backtracks"]


def _fmt(x):
    if x is None or (isinstance(x, float) and np.isnan(x)):
        return ""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


class MetricWriter:
    """Append-only ``metrics.csv`` writer; ``env_step`` must strictly increase."""

    def __init__(self, path, columns):
        self.columns = columns
        self._fh = open(path, "w", newline="", encoding="utf-8")
        self._w = csv.writer(self._fh)
        self._w.writerow(columns)
        self._last = 0
        self.rows = 0

    def write(self, row: dict):
        if row["env_step"] <= self._last:
            raise RuntimeError("env_step must strictly increase")
        self._last = row["env_step"]
        self._w.writerow([_fmt(row.get(c)) for c in self.columns])
        self.rows += 1

    def close(self):
        self._fh.close()


class _Episodes:
    """Per-env running returns; emits a metric row when an episode ends."""

    def __init__(self, n_envs, writer, t0):
        self.ret = np.zeros(n_envs)
        self.len = np.zeros(n_envs, dtype=np.int64)
        self.count = 0
        self.writer = writer
        self.t0 = t0
        self.extra = {}

    def record(self, e, tr, env_step):
        self.ret[e] += tr.reward
        self.len[e] += 1
        if tr.done:
            self.count += 1
            row = {"wall_ms": int((time.perf_counter() - self.t0) * 1000), "env_step": env_step,
                   "episode": self.count, "episode_return": float(self.ret[e]),
                   "episode_length": int(self.len[e])}
            row.update(self.extra)
            self.writer.write(row)
            self.ret[e] = 0.0
            self.len[e] = 0


def _make_envs(cfg: RunConfig, rngs: RngStreams, n: int):
    gamma = cfg["agent.gamma"]
    return [make_env(cfg.env, rngs.env_seed(i), gamma=gamma if gamma < 1 else None,
                     max_episode_len=cfg["run.max_episode_len"]) for i in range(n)]


def run(cfg: RunConfig, out_dir) -> dict:
    """Execute exactly ``run.steps`` interactions and write the run artifacts.

    Writes ``metrics.csv``, ``config.ini`` (fully resolved) and
    ``checkpoint.bin`` into ``out_dir``.
    """
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.ini"), "w", encoding="utf-8") as fh:
        fh.write(cfg.to_ini())
    rngs = RngStreams(cfg["run.seed"])
    if cfg.is_value_based:
        columns = BASE_COLUMNS + VALUE_COLUMNS
    elif cfg.algo == "trpo":
        columns = BASE_COLUMNS + TRPO_COLUMNS
    else:
        columns = BASE_COLUMNS
    writer = MetricWriter(os.path.join(out_dir, "metrics.csv"), columns)
    try:
        if cfg.is_value_based:
            agent, info = _run_value(cfg, rngs, writer)
        elif cfg.algo == "reinforce":
            agent, info = _run_reinforce(cfg, rngs, writer)
        else:
            agent, info = _run_on_policy(cfg, rngs, writer)
    finally:
        writer.close()
    agent.save(os.path.join(out_dir, "checkpoint.bin"))
    info["episodes"] = writer.rows
    return info


def _run_value(cfg, rngs, writer):
    E = max(1, cfg["run.threads"])
    L = max(0, cfg["run.updates_per_vector_step"])
    envs = _make_envs(cfg, rngs, E)
    acfg = cfg.value_agent_config()
    dim, n_act = envs[0].spec.state_dim, envs[0].spec.action_count
    agent = TwinDQN(acfg, dim, n_act, rngs) if cfg["agent.twin"] else ValueAgent(acfg, dim, n_act, rngs)
    venv = VectorEnv(envs, threads=E)
    t0 = time.perf_counter()
    ep = _Episodes(E, writer, t0)
    total = cfg["run.steps"]
    step = updates = 0
    last = {}
    try:
        while step < total:
            k = min(E, total - step)
            actions = agent.select_actions(venv.states[:k], step)
            if k == E:
                trans = venv.step(actions)
            else:
                trans = vector_step(venv.envs[:k], actions)
                for i, tr in enumerate(trans):
                    venv.states[i] = venv.envs[i].reset() if tr.done else tr.next_state
            for e, tr in enumerate(trans):
                agent.observe(tr, e)
            eps = agent.epsilon(step)
            for _ in range(L if k == E else 0):
                stats = agent.train_step(step)
                if stats is not None:
                    updates += 1
                    last = stats
            ep.extra = {"loss": last.get("loss"), "updates": updates,
                        "updates_per_interaction": L / E, "epsilon": eps,
                        "mean_priority": last.get("mean_priority"),
                        "noise_magnitude": last.get("noise_magnitude")}
            for e, tr in enumerate(trans):
                ep.record(e, tr, step + e + 1)
            step += k
    finally:
        venv.close()
    return agent, {"updates": updates, "steps": step}


def _run_on_policy(cfg, rngs, writer):
    E = max(1, cfg["run.threads"])
    envs = _make_envs(cfg, rngs, E)
    pcfg = cfg.pg_config()
    dim, n_act = envs[0].spec.state_dim, envs[0].spec.action_count
    cls = Trpo if cfg.algo == "trpo" else ActorCritic
    agent = cls(pcfg, dim, n_act, rngs)
    venv = VectorEnv(envs, threads=E)
    t0 = time.perf_counter()
    ep = _Episodes(E, writer, t0)
    total = cfg["run.steps"]
    step = 0
    try:
        while step < total:
            T = min(pcfg.rollout, (total - step) // E)
            if T == 0:
                k = total - step
                actions = agent.select_actions(venv.states[:k])
                trans = vector_step(venv.envs[:k], actions)
                for e, tr in enumerate(trans):
                    ep.record(e, tr, step + e + 1)
                step += k
                continue
            base = step
            rows = []

            def on_transition(e, tr, _rows=rows):
                _rows.append((e, tr))

            rollout = agent.collect(venv, T, on_transition)
            if cfg.algo == "a2c":
                stats = agent.a2c_step(rollout)
            elif cfg.algo == "ppo":
                stats = agent.ppo_step(rollout)
            else:
                rep = agent.trpo_step(rollout)
                stats = {"loss": -rep.improvement, "kl": rep.final_kl,
                         "improvement": rep.improvement, "cg_iters": rep.cg_iters,
                         "backtracks": rep.backtracks}
            ep.extra = {"loss": stats["loss"], "updates": agent.updates,
                        "updates_per_interaction": agent.updates / (base + T * E)}
            ep.extra.update({k: stats.get(k) for k in TRPO_COLUMNS if k in stats})
            for i, (e, tr) in enumerate(rows):
                ep.record(e, tr, base + i + 1)
            step += T * E
    finally:
        venv.close()
    return agent, {"updates": agent.updates, "steps": step}


def _run_reinforce(cfg, rngs, writer):
    env = _make_envs(cfg, rngs, 1)[0]
    pcfg = cfg.pg_config()
    agent = Reinforce(pcfg, env.spec.state_dim, env.spec.action_count, rngs)
    t0 = time.perf_counter()
    ep = _Episodes(1, writer, t0)
    total = cfg["run.steps"]
    step = 0
    s = env.reset()
    S, A, R = [], [], []
    while step < total:
        a = int(agent.select_actions(s)[0])
        tr = env.step(a)
        S.append(s)
        A.append(a)
        R.append(tr.reward)
        step += 1
        if tr.done:
            stats = agent.update([(np.array(S), np.array(A), np.array(R))])
            ep.extra = {"loss": stats["loss"], "updates": agent.updates,
                        "updates_per_interaction": agent.updates / step}
            S, A, R = [], [], []
        ep.record(0, tr, step)
        s = env.reset() if tr.done else tr.next_state
    return agent, {"updates": agent.updates, "steps": step}
