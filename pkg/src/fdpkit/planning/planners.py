"""Deception planners.

All planners take an instance plus a score model and return a PlanResult
whose configuration is feasible (checked, not assumed) and whose
expected_loss is evaluated under the exact score model, never under the
piecewise surrogate. `bound` is the planner's additive optimality guarantee
on that exact loss when one exists: 2 eps^2 for the direct fractional MILP,
2 eps^2 + eps_bs for its bisection variant, 0.0 for the exact methods, None
for heuristics.

The two MILP planners require the classical score model. The direct
fractional form additionally needs strictly positive losses; instances that
violate that are delegated to the bisection planner, which has no such
restriction.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..core import (FdpError, FdpInstance, FeatureConfig, ValidationError,
                    check_feasibility, deception_cost, expected_loss,
                    feasible_interval)
from ..models import Classical, Neural3, RequirementRule, ScoreModel
from .branch_bound import solve_milp
from .milp import (_Builder, build_bs_model, build_cc_model,
                   solve_target_extreme, surrogate_scores)
from .patterns import (build_pattern_table, select_min_fractional,
                       select_min_linear)
from .piecewise import PiecewiseExpApprox
from .simplex import LpProblem

__all__ = ["PlanResult", "plan_milp", "plan_milp_bs", "plan_greedy",
           "plan_gradient", "plan_unconstrained", "plan_exact_discrete_cost",
           "brute_force_plan", "plan_result_to_json", "plan_result_from_json"]

_PLAN_SCHEMA = 1


@dataclass(frozen=True)
class PlanResult:
    config: FeatureConfig
    expected_loss: float
    bound: float | None
    stats: dict = field(default_factory=dict)


def _finalize(instance: FdpInstance, model: ScoreModel, values: np.ndarray,
              bound: float | None, stats: dict) -> PlanResult:
    config = FeatureConfig(values=np.asarray(values, dtype=float))
    report = check_feasibility(instance, config)
    if not report.feasible:
        raise FdpError(f"planner produced an infeasible configuration: "
                       f"{report.entry_violations or report.constraint_violations or report.cost}")
    return PlanResult(config=config,
                      expected_loss=expected_loss(instance, model, config),
                      bound=bound, stats=stats)


def _require_classical(model: ScoreModel) -> np.ndarray:
    if not isinstance(model, Classical):
        raise ValidationError("this planner requires the classical score model")
    return np.asarray(model.weights, dtype=float)


def _surrogate_value_bs(instance, weights, pw, delta, values) -> float:
    fhat = surrogate_scores(instance, weights, pw, FeatureConfig(values=values))
    return float((instance.losses - delta) @ fhat)


def plan_milp(instance: FdpInstance, model: ScoreModel, eps: float = 0.1,
              *, node_limit: int = 200_000) -> PlanResult:
    """Direct fractional MILP planner, additive guarantee 2 eps^2.

    Needs strictly positive losses for the change of variables; otherwise
    the bisection planner is used instead (same model family, slightly
    weaker guarantee), which is recorded in the stats.

    On all-binary instances the fractional program is solved exactly over
    per-target row enumerations (Dinkelbach's method), which reaches the
    same optimum as the scaled formulation orders of magnitude faster; the
    equivalence is exercised directly in the test suite. Mixed instances go
    through the scaled model.
    """
    weights = _require_classical(model)
    pw = PiecewiseExpApprox.from_weights(weights, eps)
    if pw.W == 0.0:
        # constant score: every configuration induces the uniform attack
        return _finalize(instance, model, instance.actual, 0.0,
                         {"planner": "milp", "note": "constant score"})
    if float(np.min(instance.losses)) <= 0.0:
        res = plan_milp_bs(instance, model, eps=eps, node_limit=node_limit)
        stats = dict(res.stats)
        stats["note"] = "nonpositive losses, delegated to bisection"
        return PlanResult(config=res.config, expected_loss=res.expected_loss,
                          bound=res.bound, stats=stats)
    if not instance.has_continuous:
        table = build_pattern_table(instance, weights, pw)
        value, picks, effort = select_min_fractional(table, instance.losses,
                                                     instance.budget)
        values = np.array([table.rows[i][picks[i]] for i in range(instance.n)])
        stats = {"planner": "milp", "surrogate_loss": value,
                 "segments": pw.segments, "eps": eps,
                 "patterns": table.sizes, **effort}
        return _finalize(instance, model, values, 2.0 * eps * eps, stats)
    sm = build_cc_model(instance, weights, pw, ordering_binaries=True)
    u = instance.losses
    fhat0 = surrogate_scores(instance, weights, pw,
                             FeatureConfig(values=instance.actual))
    seed_val = -float(fhat0.sum() / (u @ fhat0))
    res = solve_milp(sm.problem, sm.integer_idx, leaf_value=sm.leaf_value,
                     branch_priority=sm.priority, incumbent_value=seed_val,
                     incumbent_payload=FeatureConfig(values=instance.actual),
                     node_limit=node_limit)
    if res.status != "optimal":
        raise FdpError(f"fractional MILP did not solve: {res.status}")
    config = res.payload if res.payload is not None else sm.decode(res.x)
    stats = {"planner": "milp", "nodes": res.nodes, "lp_solves": res.lp_solves,
             "surrogate_loss": -1.0 / res.fun if res.fun != 0 else math.inf,
             "certificate": float(max(0.0, res.fun - res.bound)),
             "segments": pw.segments, "eps": eps}
    return _finalize(instance, model, config.values, 2.0 * eps * eps, stats)


def plan_milp_bs(instance: FdpInstance, model: ScoreModel, eps: float = 0.1,
                 eps_bs: float = 1e-4, *,
                 node_limit: int = 200_000) -> PlanResult:
    """Bisection on the loss value, additive guarantee 2 eps^2 + eps_bs.

    Each step solves min sum_i (u_i - delta) fhat_i; a negative optimum
    means some configuration achieves surrogate loss below delta. The
    returned configuration is the solution from the last time the upper
    bound moved, or the final iterate if it never did.
    """
    weights = _require_classical(model)
    pw = PiecewiseExpApprox.from_weights(weights, eps)
    if pw.W == 0.0:
        return _finalize(instance, model, instance.actual, 0.0,
                         {"planner": "milp_bs", "note": "constant score"})
    table = None
    if not instance.has_continuous:
        table = build_pattern_table(instance, weights, pw)
    lo, hi = -1.0, 1.0
    best_cfg = None
    last_cfg = None
    iters = 0
    nodes = 0
    lp_solves = 0
    actual_cfg = FeatureConfig(values=instance.actual)
    while hi - lo > eps_bs:
        delta = 0.5 * (lo + hi)
        if table is not None:
            coeffs = [(instance.losses[i] - delta) * table.fhat[i]
                      for i in range(instance.n)]
            value, picks, res = select_min_linear(table, coeffs,
                                                  instance.budget)
            config = FeatureConfig(values=np.array(
                [table.rows[i][picks[i]] for i in range(instance.n)]))
            nodes += res.nodes
            lp_solves += res.lp_solves
        else:
            sm = build_bs_model(instance, weights, pw, delta,
                                ordering_binaries=True)
            seed = _surrogate_value_bs(instance, weights, pw, delta,
                                       instance.actual) - sm.const
            res = solve_milp(sm.problem, sm.integer_idx,
                             leaf_value=sm.leaf_value,
                             branch_priority=sm.priority, incumbent_value=seed,
                             incumbent_payload=actual_cfg,
                             node_limit=node_limit)
            if res.status != "optimal":
                raise FdpError(
                    f"bisection subproblem did not solve: {res.status}")
            config = res.payload if res.payload is not None else sm.decode(res.x)
            value = res.fun + sm.const
            nodes += res.nodes
            lp_solves += res.lp_solves
        iters += 1
        last_cfg = config
        if value < 0.0:
            hi = delta
            best_cfg = config
        else:
            lo = delta
    if best_cfg is None:
        best_cfg = last_cfg if last_cfg is not None else actual_cfg
    stats = {"planner": "milp_bs", "iterations": iters, "nodes": nodes,
             "lp_solves": lp_solves, "interval": (lo, hi),
             "segments": pw.segments, "eps": eps, "eps_bs": eps_bs}
    return _finalize(instance, model, best_cfg.values,
                     2.0 * eps * eps + eps_bs, stats)


def plan_unconstrained(instance: FdpInstance, model: ScoreModel) -> PlanResult:
    """Exact O(n log n + m) planner for the fully unconstrained game.

    Requires an infinite budget, no linear constraints, and full feasible
    ranges everywhere. Swapping feature rows between targets shows the
    optimum assigns the score-maximizing row to a prefix of the targets
    sorted by loss and the minimizing row to the rest, so scanning the n+1
    cutoffs with prefix sums is exhaustive.
    """
    weights = _require_classical(model)
    if math.isfinite(instance.budget):
        raise ValidationError("unconstrained planner requires infinite budget")
    if instance.linear_constraints:
        raise ValidationError("unconstrained planner forbids linear constraints")
    for i in range(instance.n):
        for k in range(instance.m):
            if instance.is_binary(k):
                if instance.radii[i, k] != 1.0:
                    raise ValidationError("all binary features must be free")
            else:
                lo, hi = feasible_interval(instance, i, k)
                if lo > 1e-12 or hi < 1.0 - 1e-12:
                    raise ValidationError(
                        "continuous features must range over [0, 1]")
    row_max = np.where(weights > 0, 1.0, 0.0)
    row_min = np.where(weights > 0, 0.0, 1.0)
    zero = weights == 0.0
    row_max[zero] = 0.0
    row_min[zero] = 0.0
    # normalized scores keep the exponents tame; ratios are what matter
    W = float(np.abs(weights).sum())
    f_max = math.exp(row_max @ weights - W)
    f_min = math.exp(row_min @ weights - W)
    order = np.argsort(instance.losses, kind="stable")
    u_sorted = instance.losses[order]
    prefix = np.concatenate([[0.0], np.cumsum(u_sorted)])
    total = prefix[-1]
    n = instance.n
    js = np.arange(n + 1)
    num = f_max * prefix + f_min * (total - prefix)
    den = f_max * js + f_min * (n - js)
    losses = num / den
    j_best = int(np.argmin(losses))
    values = np.empty_like(instance.actual)
    values[order[:j_best]] = row_max
    values[order[j_best:]] = row_min
    stats = {"planner": "unconstrained", "cutoff": j_best,
             "loss_curve_min": float(losses[j_best])}
    return _finalize(instance, model, values, 0.0, stats)


def _score_extreme_row(instance, model, i: int, direction: str,
                       steps: int, step_size: float) -> np.ndarray:
    """Feature row pushing target i's score to an extreme, feasibly."""
    if isinstance(model, Classical):
        return solve_target_extreme(instance, np.asarray(model.weights), i,
                                    direction)
    if instance.constraints_for(i):
        raise ValidationError(
            "gradient extreme search does not support linear constraints")
    sign = 1.0 if direction == "max" else -1.0
    lo = np.empty(instance.m)
    hi = np.empty(instance.m)
    for k in range(instance.m):
        if instance.is_binary(k):
            if instance.radii[i, k] == 0.0:
                lo[k] = hi[k] = instance.actual[i, k]
            else:
                lo[k], hi[k] = 0.0, 1.0
        else:
            lo[k], hi[k] = feasible_interval(instance, i, k)
    x = 0.5 * (lo + hi)
    for _ in range(steps):
        g = _log_score_input_grad(model, x[None, :])[0]
        x = np.clip(x + sign * step_size * g, lo, hi)
    if instance.binary_mask.any():
        bm = instance.binary_mask
        x[bm] = np.round(x[bm])
        x = np.clip(x, lo, hi)
    return x


def _log_score_input_grad(model, X: np.ndarray) -> np.ndarray:
    """d log f / d x, rows of X handled independently."""
    if isinstance(model, Classical):
        return np.broadcast_to(model.weights, X.shape).copy()
    if isinstance(model, Neural3):
        h1 = np.tanh(X @ model.w1 + model.b1)
        h2 = np.tanh(h1 @ model.w2 + model.b2)
        g2 = (1.0 - h2 ** 2) * model.w3
        g1 = (1.0 - h1 ** 2) * (g2 @ model.w2.T)
        return g1 @ model.w1.T
    raise ValidationError("score gradients need a classical or neural model")


def plan_greedy(instance: FdpInstance, model: ScoreModel, *,
                steps: int = 200, step_size: float = 0.05) -> PlanResult:
    """Two-pointer heuristic: walk targets sorted by loss from both ends,
    attracting the attacker to cheap targets and repelling it from costly
    ones whenever the move fits the remaining budget. No guarantee.
    """
    order = np.argsort(instance.losses, kind="stable")
    values = np.array(instance.actual, dtype=float, copy=True)
    remaining = instance.budget
    i, j = 0, instance.n - 1
    moves = 0
    while i < j:
        progressed = False
        ti = order[i]
        row = _score_extreme_row(instance, model, ti, "max", steps, step_size)
        cost = float(np.abs(row - instance.actual[ti]) @ instance.costs[ti])
        if cost <= remaining + 1e-12:
            values[ti] = row
            remaining -= cost
            i += 1
            moves += 1
            progressed = True
        if i >= j:
            break
        tj = order[j]
        row = _score_extreme_row(instance, model, tj, "min", steps, step_size)
        cost = float(np.abs(row - instance.actual[tj]) @ instance.costs[tj])
        if cost <= remaining + 1e-12:
            values[tj] = row
            remaining -= cost
            j -= 1
            moves += 1
            progressed = True
        if not progressed:
            break
    stats = {"planner": "greedy", "moves": moves,
             "budget_left": float(remaining) if math.isfinite(remaining) else None}
    return _finalize(instance, model, values, None, stats)


def plan_gradient(instance: FdpInstance, model: ScoreModel, *,
                  steps: int = 400, step_size: float = 0.05,
                  restarts: int = 3, penalty: float = 1e3,
                  seed: int = 0) -> PlanResult:
    """Projected gradient descent on the expected loss, continuous instances
    only (no binary features, no linear constraints). Budget handled by a
    quadratic penalty during descent and an exact pullback at the end:
    scaling all deviations by B/cost is feasible because the cost is
    positively homogeneous in them. No guarantee; deterministic per seed.
    """
    if instance.binary_mask.any():
        raise ValidationError("gradient planner requires continuous features")
    if instance.linear_constraints:
        raise ValidationError("gradient planner forbids linear constraints")
    u = instance.losses
    lo = np.empty_like(instance.actual)
    hi = np.empty_like(instance.actual)
    for i in range(instance.n):
        for k in range(instance.m):
            lo[i, k], hi[i, k] = feasible_interval(instance, i, k)
    rng = np.random.default_rng(seed)
    starts = [np.array(instance.actual, dtype=float, copy=True)]
    for _ in range(max(0, restarts - 1)):
        starts.append(lo + rng.random(instance.actual.shape) * (hi - lo))

    def pullback(X):
        if not math.isfinite(instance.budget):
            return X
        cost = float((np.abs(X - instance.actual) * instance.costs).sum())
        if cost <= instance.budget or cost == 0.0:
            return X
        t = instance.budget / cost
        return instance.actual + t * (X - instance.actual)

    best = None
    for X in starts:
        for _ in range(steps):
            logf = _log_score_input_grad(model, X)
            scores = _model_scores(model, X)
            p = scores / scores.sum()
            U = float(p @ u)
            grad = (p * (u - U))[:, None] * logf
            if math.isfinite(instance.budget):
                cost = float((np.abs(X - instance.actual) * instance.costs).sum())
                over = cost - instance.budget
                if over > 0:
                    grad = grad + (2.0 * penalty * over) * instance.costs \
                        * np.sign(X - instance.actual)
            X = np.clip(X - step_size * grad, lo, hi)
        X = pullback(X)
        val = expected_loss(instance, model, FeatureConfig(values=X))
        if best is None or val < best[0]:
            best = (val, X)
    stats = {"planner": "gradient", "steps": steps, "restarts": len(starts),
             "seed": seed}
    return _finalize(instance, model, best[1], None, stats)


def _model_scores(model, X: np.ndarray) -> np.ndarray:
    return np.exp(_model_exponents(model, X) - _model_exponents(model, X).max())


def _model_exponents(model, X: np.ndarray) -> np.ndarray:
    if isinstance(model, Classical):
        return X @ model.weights
    if isinstance(model, Neural3):
        return model.forward(X)[2]
    raise ValidationError("score gradients need a classical or neural model")


def _target_patterns(instance: FdpInstance, i: int, grid: float | None):
    """Candidate observable rows for one target, constraints applied.

    Binary features enumerate their feasible values; continuous features
    take grid points (anchored at the interval ends, with the hidden value
    added so the do-nothing row always appears).
    """
    choices = []
    for k in range(instance.m):
        if instance.is_binary(k):
            if instance.radii[i, k] == 0.0:
                choices.append([instance.actual[i, k]])
            else:
                choices.append([0.0, 1.0])
        else:
            lo, hi = feasible_interval(instance, i, k)
            if grid is None:
                raise ValidationError(
                    "continuous features need a grid step for enumeration")
            pts = list(np.arange(lo, hi, grid)) + [hi, instance.actual[i, k]]
            choices.append(sorted(set(float(p) for p in pts)))
    rows = np.array(list(itertools.product(*choices)))
    keep = np.ones(len(rows), dtype=bool)
    for con in instance.constraints_for(i):
        vals = sum(a * rows[:, k] for k, a in con.terms)
        if con.relation == "eq":
            keep &= np.abs(vals - con.rhs) <= 1e-9
        else:
            keep &= vals <= con.rhs + 1e-9
    return rows[keep]


def brute_force_plan(instance: FdpInstance, model: ScoreModel, *,
                     grid: float | None = None,
                     cap: int = 10_000_000) -> PlanResult:
    """Exhaustive reference planner.

    Enumerates feasible rows per target and sweeps their product with
    streaming accumulators, so memory stays linear in the product size and
    nothing is recomputed per combination. Exact on all-binary instances;
    with continuous features it is exact on the grid only, so no bound is
    reported there.
    """
    pats = [_target_patterns(instance, i, grid) for i in range(instance.n)]
    sizes = [len(p) for p in pats]
    total = 1
    for s in sizes:
        total *= s
        if total > cap:
            raise FdpError(f"pattern product exceeds cap {cap}")
    costs = [np.abs(pats[i] - instance.actual[i]) @ instance.costs[i]
             for i in range(instance.n)]
    cost_acc = np.zeros(1)
    if isinstance(model, RequirementRule):
        cur_max = np.full(1, -1.0)
        u_at = np.zeros(1)
        cnt_at = np.zeros(1)
        for i in range(instance.n):
            c = model.counts(pats[i]).astype(float)
            bigger = c[None, :] > cur_max[:, None]
            equal = c[None, :] == cur_max[:, None]
            new_max = np.where(bigger, c[None, :], cur_max[:, None])
            new_u = np.where(bigger, instance.losses[i],
                             u_at[:, None] + np.where(equal, instance.losses[i], 0.0))
            new_cnt = np.where(bigger, 1.0,
                               cnt_at[:, None] + np.where(equal, 1.0, 0.0))
            cur_max = new_max.ravel()
            u_at = new_u.ravel()
            cnt_at = new_cnt.ravel()
            cost_acc = (cost_acc[:, None] + costs[i][None, :]).ravel()
        loss = u_at / cnt_at
    else:
        # one shared normalization across targets; per-target maxima would
        # distort the score ratios the attack distribution is built from
        expos = [_model_exponents(model, pats[i]) for i in range(instance.n)]
        gmax = max(float(e.max()) for e in expos)
        S = np.zeros(1)
        T = np.zeros(1)
        for i in range(instance.n):
            f = np.exp(expos[i] - gmax)
            S = (S[:, None] + f[None, :]).ravel()
            T = (T[:, None] + instance.losses[i] * f[None, :]).ravel()
            cost_acc = (cost_acc[:, None] + costs[i][None, :]).ravel()
        loss = T / S
    feasible = cost_acc <= instance.budget + 1e-9
    if not np.any(feasible):
        raise FdpError("no affordable combination found")
    loss = np.where(feasible, loss, np.inf)
    flat = int(np.argmin(loss))
    idx = np.unravel_index(flat, sizes)
    values = np.array([pats[i][idx[i]] for i in range(instance.n)])
    exact = not instance.has_continuous
    stats = {"planner": "brute_force", "combinations": total,
             "grid": grid}
    return _finalize(instance, model, values, 0.0 if exact else None, stats)


def plan_exact_discrete_cost(instance: FdpInstance, model: ScoreModel, *,
                             max_iter: int = 60) -> PlanResult:
    """Exact planner when only discrete features carry deception cost.

    Per target, discrete rows are enumerated (with their exact scores and
    costs) while the continuous part is summarized by the attainable score
    interval [alpha_i, beta_i]. Products between the combination choice and
    the continuous score are McCormick-linearized, which is exact here
    because the chooser is binary. The fractional objective is handled by
    Dinkelbach iterations: solve min sum (u_i - delta) F_i, move delta to
    the achieved ratio, stop when it is a fixed point. Continuous features
    are then recovered by filling coordinates until they meet the optimal
    continuous score, which a connected feasible box always allows.
    """
    weights = _require_classical(model)
    cont = ~instance.binary_mask
    if np.any(instance.costs[:, cont] != 0.0):
        raise ValidationError("continuous features must be cost-free here")
    for con in instance.linear_constraints:
        for k, _ in con.terms:
            if not instance.is_binary(k):
                raise ValidationError(
                    "constraints may only touch discrete features here")
    n, m = instance.n, instance.m
    disc_idx = np.nonzero(instance.binary_mask)[0]
    cont_idx = np.nonzero(cont)[0]

    pats, fd, cost_d = [], [], []
    for i in range(n):
        free = [k for k in disc_idx if instance.radii[i, k] == 1.0]
        if len(free) > 16:
            raise FdpError("too many free discrete features to enumerate")
        rows = []
        for bits in itertools.product([0.0, 1.0], repeat=len(free)):
            row = np.array(instance.actual[i], dtype=float, copy=True)
            row[free] = bits
            ok = True
            for con in instance.constraints_for(i):
                val = sum(a * row[k] for k, a in con.terms)
                ok &= (abs(val - con.rhs) <= 1e-9 if con.relation == "eq"
                       else val <= con.rhs + 1e-9)
            if ok:
                rows.append(row)
        rows = np.array(rows)
        pats.append(rows)
        expo = rows[:, disc_idx] @ weights[disc_idx]
        fd.append(expo)
        cost_d.append(np.abs(rows - instance.actual[i]) @ instance.costs[i])

    # normalize both factors so the exponentials stay modest
    fd_shift = max(float(np.max(e)) for e in fd) if n else 0.0
    fd = [np.exp(e - fd_shift) for e in fd]
    alpha = np.empty(n)
    beta = np.empty(n)
    lo_c = np.empty((n, len(cont_idx)))
    hi_c = np.empty((n, len(cont_idx)))
    for i in range(n):
        for t, k in enumerate(cont_idx):
            lo_c[i, t], hi_c[i, t] = feasible_interval(instance, i, k)
        wk = weights[cont_idx]
        alpha[i] = np.where(wk > 0, lo_c[i], hi_c[i]) @ wk
        beta[i] = np.where(wk > 0, hi_c[i], lo_c[i]) @ wk
    fc_shift = float(np.max(beta)) if len(cont_idx) else 0.0
    alpha_e = np.exp(alpha - fc_shift) if len(cont_idx) else np.ones(n)
    beta_e = np.exp(beta - fc_shift) if len(cont_idx) else np.ones(n)

    def solve_at(delta):
        bld = _Builder()
        fc_cols = [bld.var(alpha_e[i], beta_e[i]) for i in range(n)]
        y_cols, g_cols = [], []
        ints = []
        for i in range(n):
            yc, gc = [], []
            for j in range(len(pats[i])):
                coef = float(instance.losses[i] - delta)
                g = bld.var(0.0, fd[i][j] * beta_e[i], coef)
                y = bld.var(0.0, 1.0)
                ints.append(y)
                yc.append(y)
                gc.append(g)
                fdj = fd[i][j]
                bld.row([g, y], [1.0, -fdj * beta_e[i]], "leq", 0.0)
                bld.row([y, g], [fdj * alpha_e[i], -1.0], "leq", 0.0)
                bld.row([g, fc_cols[i]], [1.0, -fdj], "leq", 0.0)
                bld.row([fc_cols[i], g, y], [fdj, -1.0, fdj * beta_e[i]],
                        "leq", fdj * beta_e[i])
            bld.row(yc, [1.0] * len(yc), "eq", 1.0)
            y_cols.append(yc)
            g_cols.append(gc)
        if math.isfinite(instance.budget):
            cols = [y for yc in y_cols for y in yc]
            coefs = [c for i in range(n) for c in cost_d[i]]
            bld.row(cols, coefs, "leq", instance.budget)
        res = solve_milp(bld.problem(), np.array(ints, dtype=int))
        if res.status != "optimal":
            raise FdpError(f"discrete-cost subproblem failed: {res.status}")
        F = np.empty(n)
        pick = np.empty(n, dtype=int)
        for i in range(n):
            yv = np.array([res.x[c] for c in y_cols[i]])
            pick[i] = int(np.argmax(yv))
            F[i] = fd[i][pick[i]] * res.x[fc_cols[i]]
        fc_val = np.array([res.x[c] for c in fc_cols])
        return res.fun, F, pick, fc_val

    delta = expected_loss(instance, model,
                          FeatureConfig(values=instance.actual))
    pick = None
    fc_val = None
    for it in range(max_iter):
        _, F, pick, fc_val = solve_at(delta)
        new_delta = float((instance.losses @ F) / F.sum())
        if abs(new_delta - delta) <= 1e-12:
            delta = new_delta
            break
        delta = new_delta

    values = np.array([pats[i][pick[i]] for i in range(n)])
    if len(cont_idx):
        wk = weights[cont_idx]
        for i in range(n):
            target_log = math.log(min(max(fc_val[i], alpha_e[i]), beta_e[i])) \
                + fc_shift
            row = np.where(wk > 0, lo_c[i], hi_c[i])  # score-minimal start
            surplus = target_log - float(row @ wk)
            for t in range(len(cont_idx)):
                if abs(wk[t]) < 1e-15 or surplus <= 1e-15:
                    continue
                gain = abs(wk[t]) * (hi_c[i, t] - lo_c[i, t])
                take = min(1.0, surplus / gain) if gain > 0 else 0.0
                step = take * (hi_c[i, t] - lo_c[i, t])
                row[t] += step if wk[t] > 0 else -step
                surplus -= take * gain
            values[i, cont_idx] = row
        # cost-free coordinates with zero weight stay at the hidden value
        for t, k in enumerate(cont_idx):
            if weights[k] == 0.0:
                values[:, k] = instance.actual[:, k]
    stats = {"planner": "exact_discrete_cost", "iterations": it + 1,
             "delta": delta}
    return _finalize(instance, model, values, 0.0, stats)


def plan_result_to_json(result: PlanResult) -> str:
    def clean(v):
        if isinstance(v, (np.floating, float)):
            f = float(v)
            return f if math.isfinite(f) else None
        if isinstance(v, (np.integer, int)):
            return int(v)
        if isinstance(v, (tuple, list)):
            return [clean(x) for x in v]
        return v
    doc = {"version": _PLAN_SCHEMA,
           "config": [[float(v) for v in row] for row in result.config.values],
           "expected_loss": float(result.expected_loss),
           "bound": None if result.bound is None else float(result.bound),
           "stats": {k: clean(v) for k, v in result.stats.items()}}
    return json.dumps(doc, indent=2, sort_keys=True)


def plan_result_from_json(text: str) -> PlanResult:
    doc = json.loads(text)
    if doc.get("version") != _PLAN_SCHEMA:
        raise ValidationError(f"unsupported plan version {doc.get('version')}")
    extra = set(doc) - {"version", "config", "expected_loss", "bound", "stats"}
    if extra:
        raise ValidationError(f"unknown plan fields {sorted(extra)}")
    return PlanResult(config=FeatureConfig(values=np.array(doc["config"], dtype=float)),
                      expected_loss=float(doc["expected_loss"]),
                      bound=None if doc["bound"] is None else float(doc["bound"]),
                      stats=dict(doc.get("stats", {})))
