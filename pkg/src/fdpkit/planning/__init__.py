from .piecewise import PiecewiseExpApprox
from .simplex import LpProblem, LpResult, SimplexError, solve_lp
from .branch_bound import MilpResult, solve_milp
from .milp import (SurrogateModel, build_bs_model, build_cc_model,
                   solve_target_extreme, surrogate_scores)
from .patterns import (PatternTable, build_pattern_table,
                       select_min_fractional, select_min_linear)
from .planners import (PlanResult, brute_force_plan, plan_exact_discrete_cost,
                       plan_gradient, plan_greedy, plan_milp, plan_milp_bs,
                       plan_result_from_json, plan_result_to_json,
                       plan_unconstrained)

__all__ = [
    "PiecewiseExpApprox",
    "LpProblem", "LpResult", "SimplexError", "solve_lp",
    "MilpResult", "solve_milp",
    "SurrogateModel", "build_bs_model", "build_cc_model",
    "solve_target_extreme", "surrogate_scores",
    "PatternTable", "build_pattern_table",
    "select_min_fractional", "select_min_linear",
    "PlanResult", "brute_force_plan", "plan_exact_discrete_cost",
    "plan_gradient", "plan_greedy", "plan_milp", "plan_milp_bs",
    "plan_result_from_json", "plan_result_to_json", "plan_unconstrained",
]
