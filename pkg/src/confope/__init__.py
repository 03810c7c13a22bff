"""Worst-case lower bounds for off-policy evaluation under iid unobserved
confounding: confounded fitted-Q-evaluation and s-rectangular robust-MDP
bounds, with benchmark environments and a sweep CLI."""

from .confounded import (
    ConfoundedMDP,
    InjectionResult,
    MarginalModel,
    audit_sensitivity,
    full_information_value,
    inject_confounding,
    marginalize,
    reweighted_conditional_mean,
    unconfounded_lift,
)
from .dataset import EmpiricalModel, Trajectory, estimate, population_model, simulate
from .envs import BenchmarkEnv, load_env, load_env_file, steady_state_transform
from .fqe import FqeBoundResult, confounded_fqe, naive_bound_step, naive_fqe, nominal_fqe
from .lp import BoxEqualityLP, LPSolution, solve, solve_bruteforce
from .mdp import (
    PolicyTable,
    TabularMDP,
    ValueTable,
    bellman_apply,
    mix_q_into_v,
    policy_value,
    zero_values,
)
from .plotting import render_chart
from .results import BoundResult, results_from_csv, results_to_csv
from .robust import (
    CandidateModel,
    RobustBoundResult,
    StateUncertaintyProblem,
    robust_value_iteration,
    single_step_bound,
    solve_state,
    tightness_check,
)
from .sensitivity import (
    IntervalBox,
    SensitivityParams,
    alpha_beta,
    odds_interval,
    policy_box,
    transition_box,
)

__all__ = [name for name in dir() if not name.startswith("_")]
