"""Mixed-integer models behind the deception planners.

Two surrogate formulations over the piecewise score approximation:

* `build_bs_model`: the inner problem of the bisection planner,
  min sum_i (u_i - delta) fhat_i, which is linear in the segment fills.
* `build_cc_model`: the direct fractional formulation after the
  Charnes-Cooper change of variables t_i = v * fhat_i with
  v = 1 / sum_i u_i fhat_i, normalized by sum_i u_i t_i = 1. The objective
  max sum t_i is negated to fit the minimizing solver, and t is substituted
  out through t_i = v - sum_l gamma_l s_il.

Fill-ordering discipline differs by direction. Minimizing a positive
multiple of fhat fills early segments on its own (their slopes are largest),
so the bisection model only needs ordering machinery on targets whose
coefficient is negative; the Charnes-Cooper model needs it everywhere.
Where ordering cannot be bought by optimization pressure there are two
options: indicator binaries y_il (exact at integral points, the general
route) or relaxed cap-normalized rows plus exact leaf evaluation, which is
only available when every feature is binary so that integral d pins the
whole configuration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..core import (FdpError, FdpInstance, FeatureConfig, ValidationError,
                    feasible_interval)
from .piecewise import PiecewiseExpApprox
from .simplex import LpProblem
from .branch_bound import solve_milp

__all__ = ["SurrogateModel", "build_bs_model", "build_cc_model",
           "solve_target_extreme", "surrogate_scores"]

_PRI_FEATURE = 0.0  # branch d before y: fixing features usually decides fills
_PRI_ORDER = 1.0


@dataclass
class SurrogateModel:
    problem: LpProblem
    integer_idx: np.ndarray
    priority: np.ndarray
    const: float
    decode: callable
    leaf_value: callable | None = None
    info: dict = field(default_factory=dict)


class _Builder:
    def __init__(self):
        self.lb, self.ub, self.c = [], [], []
        self.rows = []  # (cols, coefs, rel, rhs)

    def var(self, lo: float, hi: float, cost: float = 0.0) -> int:
        self.lb.append(lo)
        self.ub.append(hi)
        self.c.append(cost)
        return len(self.lb) - 1

    def row(self, cols, coefs, rel, rhs) -> None:
        self.rows.append((list(cols), list(coefs), rel, float(rhs)))

    def problem(self) -> LpProblem:
        ncols = len(self.lb)
        A = np.zeros((len(self.rows), ncols))
        b = np.zeros(len(self.rows))
        rels = []
        for r, (cols, coefs, rel, rhs) in enumerate(self.rows):
            A[r, cols] = coefs
            b[r] = rhs
            rels.append(rel)
        return LpProblem(c=np.array(self.c), A=A, b=b, relations=rels,
                         lb=np.array(self.lb), ub=np.array(self.ub))


def surrogate_scores(instance: FdpInstance, weights: np.ndarray,
                     pw: PiecewiseExpApprox, config: FeatureConfig) -> np.ndarray:
    """Approximate scores fhat_i of a full configuration."""
    if pw.segments == 0:
        return np.ones(instance.n)
    exponents = config.values @ weights - pw.W
    return pw.evaluate(np.clip(exponents, -2.0 * pw.W, 0.0))


def _feature_layout(instance, weights, builder, scale_var=None, big=None):
    """Create feature variables and return per-target linear score pieces.

    Returns (terms, consts, xcols, dcols, bcols) where terms[i] is a list of
    (col, weight) contributing to w @ x_i and consts[i] collects the fixed
    part. With `scale_var` set (Charnes-Cooper mode), continuous features
    become q = x * v with box rows, and free binaries get a product variable
    b = d * v linked by big-M rows; otherwise features enter directly.
    """
    n, m = instance.n, instance.m
    w = weights
    terms = [[] for _ in range(n)]
    consts = np.zeros(n)
    xcols, dcols, bcols = {}, {}, {}
    for i in range(n):
        for k in range(m):
            if instance.is_binary(k):
                if instance.radii[i, k] == 0.0:
                    consts[i] += w[k] * instance.actual[i, k]
                    continue
                d = builder.var(0.0, 1.0)
                dcols[(i, k)] = d
                if scale_var is None:
                    if w[k] != 0.0:
                        terms[i].append((d, w[k]))
                else:
                    bb = builder.var(0.0, big)
                    bcols[(i, k)] = bb
                    builder.row([bb, d], [1.0, -big], "leq", 0.0)
                    builder.row([bb, scale_var], [1.0, -1.0], "leq", 0.0)
                    builder.row([scale_var, bb, d], [1.0, -1.0, big], "leq", big)
                    if w[k] != 0.0:
                        terms[i].append((bb, w[k]))
            else:
                lo, hi = feasible_interval(instance, i, k)
                if scale_var is None:
                    x = builder.var(lo, hi)
                    xcols[(i, k)] = x
                    if w[k] != 0.0:
                        terms[i].append((x, w[k]))
                else:
                    q = builder.var(0.0, hi * big)
                    xcols[(i, k)] = q
                    builder.row([q, scale_var], [1.0, -hi], "leq", 0.0)
                    if lo > 0.0:
                        builder.row([scale_var, q], [lo, -1.0], "leq", 0.0)
                    if w[k] != 0.0:
                        terms[i].append((q, w[k]))
    return terms, consts, xcols, dcols, bcols


def _cost_rows(instance, builder, xcols, dcols_or_bcols, scale_var=None,
               big=1.0):
    """Budget row and the |x - xhat| linearization, optionally v-scaled.

    Continuous entries must have nonnegative prices for the h >= |q - xhat v|
    relaxation to price correctly; the instance validator enforces that.
    Binary prices fold into linear terms: eta * d for xhat = 0 and
    eta * (1 - d) for xhat = 1, whose constant shifts the budget.
    """
    if not math.isfinite(instance.budget):
        return
    cols, coefs = [], []
    shift = 0.0
    for (i, k), col in xcols.items():
        eta = instance.costs[i, k]
        if eta == 0.0:
            continue
        lo, hi = feasible_interval(instance, i, k)
        xh = instance.actual[i, k]
        h = builder.var(0.0, max(hi - xh, xh - lo) * big)
        if scale_var is None:
            builder.row([col, h], [1.0, -1.0], "leq", xh)
            builder.row([col, h], [-1.0, -1.0], "leq", -xh)
        else:
            builder.row([col, scale_var, h], [1.0, -xh, -1.0], "leq", 0.0)
            builder.row([scale_var, col, h], [xh, -1.0, -1.0], "leq", 0.0)
        cols.append(h)
        coefs.append(eta)
    for (i, k), col in dcols_or_bcols.items():
        eta = instance.costs[i, k]
        if eta == 0.0:
            continue
        if instance.actual[i, k] == 0.0:
            cols.append(col)
            coefs.append(eta)
        else:
            cols.append(col)
            coefs.append(-eta)
            shift += eta
    budget = instance.budget - shift
    if scale_var is None:
        if cols:
            builder.row(cols, coefs, "leq", budget)
    else:
        builder.row(cols + [scale_var], coefs + [-budget], "leq", 0.0)


def _constraint_rows(instance, builder, xcols, dcols_or_bcols, scale_var=None):
    for con in instance.linear_constraints:
        i = con.target
        cols, coefs = [], []
        const = 0.0
        for k, a in con.terms:
            if (i, k) in xcols:
                cols.append(xcols[(i, k)])
                coefs.append(a)
            elif (i, k) in dcols_or_bcols:
                cols.append(dcols_or_bcols[(i, k)])
                coefs.append(a)
            else:
                const += a * instance.actual[i, k]
        if not cols:
            continue  # fully fixed, already satisfied by the actual config
        if scale_var is None:
            builder.row(cols, coefs, con.relation, con.rhs - const)
        else:
            builder.row(cols + [scale_var], coefs + [const - con.rhs],
                        con.relation, 0.0)


def _decode_factory(instance, xcols, dcols, vcol=None):
    def decode(x: np.ndarray) -> FeatureConfig:
        vals = np.array(instance.actual, dtype=float, copy=True)
        v = 1.0 if vcol is None else float(x[vcol])
        for (i, k), col in xcols.items():
            lo, hi = feasible_interval(instance, i, k)
            vals[i, k] = float(np.clip(x[col] / v, lo, hi))
        for (i, k), col in dcols.items():
            vals[i, k] = float(np.round(np.clip(x[col], 0.0, 1.0)))
        return FeatureConfig(values=vals)
    return decode


def build_bs_model(instance: FdpInstance, weights: np.ndarray,
                   pw: PiecewiseExpApprox, delta: float,
                   ordering_binaries: bool) -> SurrogateModel:
    """min sum_i (u_i - delta) fhat_i over feasible configurations."""
    if not ordering_binaries and instance.has_continuous:
        raise ValidationError(
            "leaf-evaluated ordering requires an all-binary instance")
    n = instance.n
    coef = instance.losses - delta
    bld = _Builder()
    terms, consts, xcols, dcols, _ = _feature_layout(instance, weights, bld)
    L = pw.segments
    gam, cap, W = pw.slopes, pw.caps, pw.W
    zcols = np.array([[bld.var(0.0, cap[l], -coef[i] * gam[l])
                       for l in range(L)] for i in range(n)], dtype=int
                     ).reshape(n, L)
    ycols = {}
    for i in range(n):
        cols = [c for c, _ in terms[i]]
        coefs = [wk for _, wk in terms[i]]
        bld.row(cols + list(zcols[i]), coefs + [1.0] * L, "eq",
                W - consts[i])
        if coef[i] >= -1e-12:
            continue  # early fill is already optimal for this target
        if ordering_binaries:
            for l in range(L - 1):
                y = bld.var(0.0, 1.0)
                ycols[(i, l)] = y
                bld.row([y, zcols[i, l]], [cap[l], -1.0], "leq", 0.0)
                bld.row([zcols[i, l + 1], y], [1.0, -cap[l + 1]], "leq", 0.0)
        else:
            for l in range(L - 1):
                bld.row([zcols[i, l + 1], zcols[i, l]],
                        [cap[l], -cap[l + 1]], "leq", 0.0)
    _cost_rows(instance, bld, xcols, dcols)
    _constraint_rows(instance, bld, xcols, dcols)

    integer_idx = list(dcols.values()) + list(ycols.values())
    priority = [_PRI_FEATURE] * len(dcols) + [_PRI_ORDER] * len(ycols)
    const = float(coef.sum())
    decode = _decode_factory(instance, xcols, dcols)

    leaf = None
    if not ordering_binaries:
        def leaf(xvec):
            cfg = decode(xvec)
            fhat = surrogate_scores(instance, weights, pw, cfg)
            return float(coef @ fhat) - const, cfg
    return SurrogateModel(problem=bld.problem(),
                          integer_idx=np.array(integer_idx, dtype=int),
                          priority=np.array(priority), const=const,
                          decode=decode, leaf_value=leaf,
                          info={"n_binaries": len(integer_idx),
                                "segments": L})


def build_cc_model(instance: FdpInstance, weights: np.ndarray,
                   pw: PiecewiseExpApprox,
                   ordering_binaries: bool) -> SurrogateModel:
    """Charnes-Cooper form of max sum t_i; requires strictly positive losses."""
    if np.min(instance.losses) <= 0.0:
        raise ValidationError(
            "the fractional transform needs strictly positive losses")
    if not ordering_binaries and instance.has_continuous:
        raise ValidationError(
            "leaf-evaluated ordering requires an all-binary instance")
    n = instance.n
    u = instance.losses
    usum = float(u.sum())
    W = pw.W
    Z = math.exp(2.0 * W) / usum  # v = 1/sum(u fhat) with fhat in [e^-2W, 1]
    bld = _Builder()
    vcol = bld.var(1.0 / usum, Z, -float(n))
    terms, consts, xcols, dcols, bcols = _feature_layout(
        instance, weights, bld, scale_var=vcol, big=Z)
    L = pw.segments
    gam, cap = pw.slopes, pw.caps
    scols = np.array([[bld.var(0.0, cap[l] * Z, gam[l]) for l in range(L)]
                      for i in range(n)], dtype=int).reshape(n, L)
    ycols, gcols = {}, {}
    for i in range(n):
        cols = [c for c, _ in terms[i]]
        coefs = [wk for _, wk in terms[i]]
        bld.row(cols + list(scols[i]) + [vcol],
                coefs + [1.0] * L + [consts[i] - W], "eq", 0.0)
        # scaled fills satisfy s_il = v * fill_l <= v * cap_l; the variable
        # bound cap_l * Z alone would let segment 0 absorb excess mass and
        # understate a target's score
        for l in range(L):
            bld.row([scols[i, l], vcol], [1.0, -cap[l]], "leq", 0.0)
        if ordering_binaries:
            for l in range(L - 1):
                y = bld.var(0.0, 1.0)
                g = bld.var(0.0, Z)
                ycols[(i, l)], gcols[(i, l)] = y, g
                bld.row([g, y], [1.0, -Z], "leq", 0.0)
                bld.row([g, vcol], [1.0, -1.0], "leq", 0.0)
                bld.row([vcol, g, y], [1.0, -1.0, Z], "leq", Z)
                bld.row([g, scols[i, l]], [cap[l], -1.0], "leq", 0.0)
                bld.row([scols[i, l + 1], g], [1.0, -cap[l + 1]], "leq", 0.0)
        else:
            for l in range(L - 1):
                bld.row([scols[i, l + 1], scols[i, l]],
                        [cap[l], -cap[l + 1]], "leq", 0.0)
    # normalization sum_i u_i t_i = 1 with t_i = v - sum_l gamma_l s_il
    nm_cols, nm_coefs = [vcol], [usum]
    for i in range(n):
        nm_cols.extend(scols[i])
        nm_coefs.extend(-u[i] * gam)
    bld.row(nm_cols, nm_coefs, "eq", 1.0)
    _cost_rows(instance, bld, xcols, bcols, scale_var=vcol, big=Z)
    _constraint_rows(instance, bld, xcols, bcols, scale_var=vcol)

    integer_idx = list(dcols.values()) + list(ycols.values())
    priority = [_PRI_FEATURE] * len(dcols) + [_PRI_ORDER] * len(ycols)
    decode = _decode_factory(instance, xcols, dcols, vcol=vcol)

    leaf = None
    if not ordering_binaries:
        def leaf(xvec):
            cfg = decode(xvec)
            fhat = surrogate_scores(instance, weights, pw, cfg)
            return -float(fhat.sum() / (u @ fhat)), cfg
    return SurrogateModel(problem=bld.problem(),
                          integer_idx=np.array(integer_idx, dtype=int),
                          priority=np.array(priority), const=0.0,
                          decode=decode, leaf_value=leaf,
                          info={"n_binaries": len(integer_idx),
                                "segments": L, "big_m": Z})


def solve_target_extreme(instance: FdpInstance, weights: np.ndarray, i: int,
                         direction: str) -> np.ndarray:
    """Feature row maximizing (or minimizing) w @ x_i on target i's own
    feasible set, ignoring cost. Falls back to a tiny MILP when the target
    carries linear constraints; otherwise the box extreme is immediate.
    """
    sign = 1.0 if direction == "max" else -1.0
    cons = instance.constraints_for(i)
    row = np.array(instance.actual[i], dtype=float, copy=True)
    if not cons:
        for k in range(instance.m):
            if instance.is_binary(k):
                if instance.radii[i, k] == 1.0:
                    row[k] = 1.0 if sign * weights[k] > 0 else 0.0
            else:
                lo, hi = feasible_interval(instance, i, k)
                row[k] = hi if sign * weights[k] > 0 else lo
        return row
    bld = _Builder()
    cols = {}
    ints = []
    for k in range(instance.m):
        if instance.is_binary(k):
            if instance.radii[i, k] == 0.0:
                continue
            cols[k] = bld.var(0.0, 1.0, -sign * weights[k])
            ints.append(cols[k])
        else:
            lo, hi = feasible_interval(instance, i, k)
            cols[k] = bld.var(lo, hi, -sign * weights[k])
    for con in cons:
        ccols, ccoefs, const = [], [], 0.0
        for k, a in con.terms:
            if k in cols:
                ccols.append(cols[k])
                ccoefs.append(a)
            else:
                const += a * instance.actual[i, k]
        if ccols:
            bld.row(ccols, ccoefs, con.relation, con.rhs - const)
    res = solve_milp(bld.problem(), np.array(ints, dtype=int))
    if res.status != "optimal":
        raise FdpError(f"target {i} has no feasible configuration")
    for k, col in cols.items():
        val = res.x[col]
        row[k] = float(np.round(val)) if instance.is_binary(k) else float(val)
    return row
