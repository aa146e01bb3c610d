from .distributions import (DiscreteDistribution, categorical_projection, cramer,
                            distributional_policy_eval_backup, divergences, kl_divergence,
                            max_wasserstein, point_mass_table, project_onto_grid,
                            quantile_levels, quantile_projection, support_grid, table_means,
                            wasserstein)
from .dp import (bellman_optimality_backup, bellman_policy_backup, check_policy,
                 export_q_csv, greedy_action, policy_transition_matrix, policy_values,
                 q_learning, solve_optimal_q, td_update, uniform_policy)
from .policy_gradient import (advantage, discounted_visitation, enumerate_trajectories,
                              exact_J, exact_policy_gradient, fd_gradient, max_kl,
                              performance_identity_check, softmax_policy, surrogate_L,
                              trajectory_policy_gradient)
