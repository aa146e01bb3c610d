from .pg import (ActorCritic, PgConfig, Reinforce, RolloutBatch, StaleRolloutError, Trpo,
                 TrpoReport, compute_gae, conjugate_gradient, fisher_softmax3, gae_advantages,
                 natural_gradient_invariance_check, reinforce_gradient)
from .value import TwinDQN, ValueAgent, ValueAgentConfig, epsilon_schedule
