"""Run configuration: INI sections, defaults, algorithm presets and env profiles.

Resolution order, later entries winning:

1. base defaults (the large-scale value set, e.g. warm-up 10 000, lr 1e-4),
2. the algorithm preset (extension flags such as ``double`` or ``noisy``),
3. the environment profile (``cartpole`` swaps in desk-scale values, first
   per family, then per algorithm),
4. keys from the user's config file,
5. command-line flags.

The snapshot written next to each run contains every resolved key, so it
parses back to an identical :class:`RunConfig`.
"""
from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field
from typing import Optional

from ..agents.pg import PgConfig
from ..agents.value import ValueAgentConfig
from ..mdp.envs import parse_env_id


def _bool(s):
    if isinstance(s, bool):
        return s
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _optstr(s):
    if s is None:
        return None
    v = str(s).strip()
    return None if v.lower() in ("", "none", "off") else v


def _ints(s):
    if isinstance(s, (tuple, list)):
        return tuple(int(x) for x in s)
    return tuple(int(x) for x in str(s).replace(",", " ").split())


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return "none"
    if isinstance(v, tuple):
        return ",".join(str(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


# section -> key -> (parser, default)
SCHEMA = {
    "run": {
        "algo": (str, "dqn"),
        "env": (str, "cartpole"),
        "steps": (int, 10_000),
        "seed": (int, 0),
        "threads": (int, 1),
        "updates_per_vector_step": (int, 1),
        "max_episode_len": (int, 200),
    },
    "agent": {
        "gamma": (float, 0.99),
        "batch_size": (int, 128),
        "loss": (str, "mse"),
        "target_network": (_bool, True),
        "target_update": (int, 1000),
        "double": (_bool, False),
        "twin": (_bool, False),
        "dueling": (_optstr, None),
        "noisy": (_bool, False),
        "sigma_init": (float, 0.5),
        "n_step": (int, 1),
        "distributional": (_optstr, None),
        "num_atoms": (int, 51),
        "v_min": (float, -10.0),
        "v_max": (float, 10.0),
        "eps_start": (float, 1.0),
        "eps_end": (float, 0.01),
        "eps_decay": (float, 30_000.0),
        "warmup": (int, 10_000),
    },
    "replay": {
        "capacity": (int, 1_000_000),
        "prioritized": (_bool, False),
        "alpha": (float, 0.5),
        "beta0": (float, 0.4),
        "t_beta": (int, 100_000),
    },
    "net": {
        "hidden": (_ints, (128, 128)),
        "lr": (float, 1e-4),
        "adam_beta1": (float, 0.9),
        "adam_beta2": (float, 0.999),
        "adam_eps": (float, 1e-8),
    },
    "pg": {
        "lam": (float, 0.95),
        "rollout": (int, 40),
        "minibatch": (int, 32),
        "epochs": (int, 3),
        "clip": (float, 0.1),
        "entropy_weight": (float, 0.01),
        "critic_weight": (float, 0.5),
        "baseline": (str, "none"),
    },
    "trpo": {
        "delta": (float, 0.01),
        "cg_iters": (int, 10),
        "cg_tol": (float, 1e-10),
        "damping": (float, 1e-3),
        "backtrack": (float, 0.5),
        "max_backtracks": (int, 10),
        "fvp": (str, "exact"),
        "critic_lr": (float, 1e-3),
        "critic_iters": (int, 20),
    },
}

VALUE_ALGOS = {
    "dqn": {},
    "double_dqn": {"agent.double": True},
    "dueling_double_dqn": {"agent.double": True, "agent.dueling": "mean"},
    "twin_dqn": {"agent.twin": True},
    "noisy_dqn": {"agent.noisy": True},
    "prioritized_dqn": {"replay.prioritized": True},
    "nstep_dqn": {"agent.n_step": 3},
    "c51": {"agent.distributional": "categorical", "agent.target_network": False},
    "qr_dqn": {"agent.distributional": "quantile"},
    "rainbow": {"agent.double": True, "agent.dueling": "mean", "agent.noisy": True,
                "replay.prioritized": True, "agent.n_step": 3,
                "agent.distributional": "categorical"},
}
PG_ALGOS = {
    "reinforce": {"run.threads": 1, "net.lr": 1e-3},
    "a2c": {"run.threads": 8},
    "ppo": {"run.threads": 8, "pg.rollout": 1024},
    "trpo": {"run.threads": 8, "pg.rollout": 512},
}
ALGOS = {**VALUE_ALGOS, **PG_ALGOS}

# Desk-scale values for the 10k-step cart-pole budget.
ENV_PROFILES = {
    "cartpole": {
        "value": {
            "agent.batch_size": 64, "agent.warmup": 500, "agent.eps_decay": 1000.0,
            "agent.target_update": 100, "replay.capacity": 10_000, "net.lr": 1e-3,
            "replay.t_beta": 10_000, "agent.v_min": 0.0, "agent.v_max": 100.0,
        },
        "pg": {"net.lr": 1e-3},
        "ppo": {
            "run.threads": 4, "pg.rollout": 64, "net.lr": 3e-3, "pg.minibatch": 64,
            "pg.epochs": 8, "pg.clip": 0.2,
        },
        "trpo": {"run.threads": 4, "pg.rollout": 128},
    },
}


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)   # "section.key" -> parsed value

    def __getitem__(self, key):
        return self.values[key]

    @property
    def algo(self) -> str:
        return self.values["run.algo"]

    @property
    def env(self) -> str:
        return self.values["run.env"]

    @property
    def is_value_based(self) -> bool:
        return self.algo in VALUE_ALGOS

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        for section, keys in SCHEMA.items():
            cp[section] = {k: _fmt(self.values[f"{section}.{k}"]) for k in keys}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def value_agent_config(self) -> ValueAgentConfig:
        v = self.values
        return ValueAgentConfig(
            gamma=v["agent.gamma"], batch_size=v["agent.batch_size"], lr=v["net.lr"],
            adam_beta1=v["net.adam_beta1"], adam_beta2=v["net.adam_beta2"],
            adam_eps=v["net.adam_eps"], hidden=v["net.hidden"], loss=v["agent.loss"],
            target_network=v["agent.target_network"], target_update=v["agent.target_update"],
            double=v["agent.double"], dueling=v["agent.dueling"], noisy=v["agent.noisy"],
            sigma_init=v["agent.sigma_init"], prioritized=v["replay.prioritized"],
            alpha=v["replay.alpha"], beta0=v["replay.beta0"], t_beta=v["replay.t_beta"],
            n_step=v["agent.n_step"], distributional=v["agent.distributional"],
            num_atoms=v["agent.num_atoms"], v_min=v["agent.v_min"], v_max=v["agent.v_max"],
            eps_start=v["agent.eps_start"], eps_end=v["agent.eps_end"],
            eps_decay=v["agent.eps_decay"], warmup=v["agent.warmup"],
            capacity=v["replay.capacity"])

    def pg_config(self) -> PgConfig:
        v = self.values
        return PgConfig(
            gamma=v["agent.gamma"], lam=v["pg.lam"], rollout=v["pg.rollout"],
            num_envs=v["run.threads"], batch_size=v["pg.minibatch"], epochs=v["pg.epochs"],
            clip=v["pg.clip"], entropy_weight=v["pg.entropy_weight"],
            critic_weight=v["pg.critic_weight"], lr=v["net.lr"],
            adam_beta1=v["net.adam_beta1"], adam_beta2=v["net.adam_beta2"],
            adam_eps=v["net.adam_eps"], hidden=v["net.hidden"], baseline=v["pg.baseline"],
            delta=v["trpo.delta"], cg_iters=v["trpo.cg_iters"], cg_tol=v["trpo.cg_tol"],
            damping=v["trpo.damping"], backtrack=v["trpo.backtrack"],
            max_backtracks=v["trpo.max_backtracks"], fvp=v["trpo.fvp"],
            critic_lr=v["trpo.critic_lr"], critic_iters=v["trpo.critic_iters"])


def _parse_ini(text: str) -> dict:
    cp = configparser.ConfigParser()
    cp.read_string(text)
    out = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ValueError(f"unknown config section [{section}]")
        for key, raw in cp[section].items():
            if key not in SCHEMA[section]:
                raise ValueError(f"unknown config key {section}.{key}")
            parser = SCHEMA[section][key][0]
            out[f"{section}.{key}"] = parser(raw)
    return out


def _check_overrides(overrides: dict) -> dict:
    out = {}
    for full, val in overrides.items():
        section, _, key = full.partition(".")
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ValueError(f"unknown config key {full}")
        out[full] = SCHEMA[section][key][0](val) if isinstance(val, str) else val
    return out


def resolve(user: Optional[dict] = None, cli: Optional[dict] = None) -> RunConfig:
    """Merge defaults, algorithm preset, env profile, file keys and CLI flags."""
    user = _check_overrides(user or {})
    cli = _check_overrides({k: v for k, v in (cli or {}).items() if v is not None})
    picked = {**user, **cli}
    algo = picked.get("run.algo", SCHEMA["run"]["algo"][1])
    env = picked.get("run.env", SCHEMA["run"]["env"][1])
    if algo not in ALGOS:
        raise ValueError(f"unknown algorithm {algo!r}; choose from {sorted(ALGOS)}")
    env_name, _ = parse_env_id(env)
    values = {f"{s}.{k}": d for s, keys in SCHEMA.items() for k, (_, d) in keys.items()}
    family = "value" if algo in VALUE_ALGOS else "pg"
    values.update(ALGOS[algo])
    profile = ENV_PROFILES.get(env_name, {})
    values.update(profile.get(family, {}))
    values.update(profile.get(algo, {}))
    values.update(picked)
    return RunConfig(values)


def load_config(path: Optional[str] = None, cli: Optional[dict] = None) -> RunConfig:
    user = {}
    if path:
        with open(path, encoding="utf-8") as fh:
            user = _parse_ini(fh.read())
    return resolve(user, cli)


def parse_config_text(text: str) -> RunConfig:
    return resolve(_parse_ini(text))
