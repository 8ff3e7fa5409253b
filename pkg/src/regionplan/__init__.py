"""POMDP planning: exact incremental-pruning value iteration, a
region-observable model approximation with its restricted solver, and a
paired simulation protocol for judging approximation quality."""

from .model import (Pomdp, ModelValidationError,
                    ZeroProbabilityObservationError, belief_update,
                    expected_reward, joint_prob, observation_prob,
                    point_belief, validate, validate_belief)
from .lp import LinearProgram, LpNumericalError, LpSolution, solve_lp
from .pruning import (StateValueVector, SENTINEL_ACTION, best, cross_sum,
                      dominate, induced_value, pointwise_purge, purge,
                      purge_region)
from .exact import (IterationCapError, SolveReport, bellman_residual,
                    dp_update, enumerate_policy_trees, exhaustive_update,
                    greedy_action, incr_pruning, policy_tree_value, q_set,
                    solve_pomdp)
from .regions import (RegionSystem, RegionSystemError, RegionalSolveReport,
                      RegionalValueSets, Ropomdp, approx_action,
                      degree_of_support, ideal_step, radius_k_regions,
                      regional_q_set, ropomdp_stop, ropomdp_update,
                      solve_ropomdp)
from .office import (MazeLayout, build_office_pomdp, builtin_layouts,
                     goal_state_index, parse_map)
from .modelio import (ParseError, SolutionDocument, parse_model,
                      read_solution, serialize_model, write_solution)
from .sim import (CampaignStats, TrialConfig, TrialResult, campaign_csv,
                  run_campaign, run_trial_m, run_trial_m_prime)

__all__ = [n for n in dir() if not n.startswith("_")]
