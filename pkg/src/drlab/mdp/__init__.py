from .core import MdpSpec, Trajectory, Transition, discounted_return, rewards_to_go
from .envs import (CartPole, Env, EpisodeTerminatedError, TabularEnv, make_env,
                   make_tabular, max_return, parse_env_id)
from .tabular import TabularMDP, chain, cliff, gridworld, layered
from .vector import VectorEnv, vector_step

__all__ = [
    "MdpSpec", "Transition", "Trajectory", "discounted_return", "rewards_to_go",
    "Env", "CartPole", "TabularEnv", "EpisodeTerminatedError", "make_env",
    "make_tabular", "max_return", "parse_env_id",
    "TabularMDP", "chain", "gridworld", "cliff", "layered",
    "VectorEnv", "vector_step",
]
