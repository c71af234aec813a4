"""Distributed non-Bayesian learning: update rules, rate constants and a reproducible simulator."""

from .analysis import (ConfidenceProfile, NoSuboptimalHypothesisError, RateConstants, bound_curve,
                       group_confidence, kl_divergence, kl_matrix, log_belief_ratio, objective,
                       observationally_equivalent, optimal_set, rate_constants)
from .core import (AgentSpec, BeliefState, DegeneratePosteriorError, HypothesisSet, LikelihoodModel,
                   SignalAlphabet, normalize_log, uniform_prior, validate_model)
from .graphs import (AcceleratedOperator, BoundCheck, Graph, GraphSchedule, StaticSchedule,
                     TemplateSchedule, WeightMatrix, check_accelerated_envelope, check_b_strong_connectivity,
                     check_consensus_contraction, check_mixing_bounds, complete_graph, cycle_graph,
                     edge_split_schedule, grid_graph, lazy_metropolis_weights, metropolis_weights, path_graph,
                     product_chain, random_schedule, topology)
from .rules import (AgentMemory, NetworkState, PoolKind, UpdateRuleKind, accelerated_update, bayes_update,
                    externally_bayesian_check, geometric_pool_update, likelihood_sharing_update,
                    linear_rule_update, linear_swap_gap, network_step, qlop_pool)
from .scenarios import (DiscretizationSpec, LocalizationScenario, Role, Scenario, build_clique_merge,
                        build_localization, build_topology_sweep, build_two_agent_example,
                        mixed_roles_scenario, one_informative_agents)
from .simulator import (MonteCarloSummary, SimulationConfig, Trajectory, convergence_time, monte_carlo,
                        run, step)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
