"""Per-target enumeration support for all-binary instances.

When every feature is binary, each target has at most 2^(free bits) feasible
observable rows. Enumerating them once turns both planner subproblems into
small assignment MILPs over row selectors:

* a linear objective min sum_i c_i[p] lambda_ip (one row per target plus a
  budget row), whose LP relaxation is the product of simplices cut by one
  knapsack and therefore nearly integral;
* the fractional surrogate objective min sum u fhat / sum fhat, reduced to
  a finite sequence of the linear form by Dinkelbach's method, which for a
  finite feasible set reaches the exact optimum in finitely many steps.

The z-space formulations stay the reference semantics; these solvers are a
faster route to the same optima and are cross-checked against them in the
tests.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..core import FdpError, FdpInstance, ValidationError
from .branch_bound import solve_milp
from .piecewise import PiecewiseExpApprox
from .simplex import LpProblem

__all__ = ["PatternTable", "build_pattern_table", "select_min_linear",
           "select_min_fractional"]

_MAX_FREE_BITS = 16


@dataclass
class PatternTable:
    rows: list        # per target: (p_i, m) observable rows
    fhat: list        # per target: (p_i,) surrogate scores
    cost: list        # per target: (p_i,) deception costs
    actual_pick: np.ndarray  # index of the do-nothing row per target

    @property
    def sizes(self) -> list:
        return [len(r) for r in self.rows]


def build_pattern_table(instance: FdpInstance, weights: np.ndarray,
                        pw: PiecewiseExpApprox) -> PatternTable:
    if instance.has_continuous:
        raise ValidationError("pattern enumeration needs an all-binary instance")
    rows_all, fhat_all, cost_all, actual_pick = [], [], [], []
    for i in range(instance.n):
        free = [k for k in range(instance.m) if instance.radii[i, k] == 1.0]
        if len(free) > _MAX_FREE_BITS:
            raise FdpError(
                f"target {i} has {len(free)} free features, enumeration "
                f"capped at {_MAX_FREE_BITS}")
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
        expo = rows @ weights - pw.W
        cost = np.abs(rows - instance.actual[i]) @ instance.costs[i]
        # rows with identical scores are interchangeable to the attacker, so
        # only the cheapest of each score class can ever matter (common when
        # some weights are exactly zero)
        order = np.lexsort((np.arange(len(rows)), cost, expo))
        keep = sorted(idx for j, idx in enumerate(order)
                      if j == 0 or expo[idx] != expo[order[j - 1]])
        rows, expo, cost = rows[keep], expo[keep], cost[keep]
        fhat = (np.ones(len(rows)) if pw.segments == 0
                else pw.evaluate(np.clip(expo, -2.0 * pw.W, 0.0)))
        # the do-nothing seed must come from the actual row's own score
        # class: its kept representative costs at most 0, so it is always
        # affordable, which nearest-by-distance would not guarantee
        actual_expo = float(instance.actual[i] @ weights - pw.W)
        rows_all.append(rows)
        fhat_all.append(fhat)
        cost_all.append(cost)
        actual_pick.append(int(np.argmin(np.abs(expo - actual_expo))))
    return PatternTable(rows=rows_all, fhat=fhat_all, cost=cost_all,
                        actual_pick=np.array(actual_pick))


def select_min_linear(table: PatternTable, coeffs: list,
                      budget: float) -> tuple[float, np.ndarray, "MilpResult"]:
    """min sum_i coeffs[i][p(i)] subject to the joint budget.

    Returns the optimal value, the chosen row index per target, and the
    underlying solver result for effort accounting.
    """
    n = len(table.rows)
    sizes = table.sizes
    offs = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
    ncols = int(offs[-1])
    c = np.concatenate([np.asarray(coeffs[i], dtype=float) for i in range(n)])
    rows = n + (1 if np.isfinite(budget) else 0)
    A = np.zeros((rows, ncols))
    b = np.zeros(rows)
    rels = []
    for i in range(n):
        A[i, offs[i]:offs[i + 1]] = 1.0
        b[i] = 1.0
        rels.append("eq")
    if np.isfinite(budget):
        A[n] = np.concatenate([table.cost[i] for i in range(n)])
        b[n] = budget
        rels.append("leq")
    problem = LpProblem(c=c, A=A, b=b, relations=rels,
                        lb=np.zeros(ncols), ub=np.ones(ncols))
    seed_cols = offs[:-1] + table.actual_pick
    seed_val = float(c[seed_cols].sum())
    res = solve_milp(problem, np.arange(ncols), incumbent_value=seed_val,
                     incumbent_payload=table.actual_pick.copy())
    if res.status != "optimal":
        raise FdpError(f"pattern selection failed: {res.status}")
    if res.x is None:
        picks = res.payload
    else:
        picks = np.array([int(np.argmax(res.x[offs[i]:offs[i + 1]]))
                          for i in range(n)])
    return float(res.fun), picks, res


def select_min_fractional(table: PatternTable, losses: np.ndarray,
                          budget: float, *, max_iter: int = 100
                          ) -> tuple[float, np.ndarray, dict]:
    """Exact min of sum u fhat / sum fhat over affordable row choices."""
    n = len(table.rows)
    f0 = np.array([table.fhat[i][table.actual_pick[i]] for i in range(n)])
    delta = float((losses @ f0) / f0.sum())
    picks = table.actual_pick.copy()
    nodes = 0
    lp_solves = 0
    for it in range(max_iter):
        coeffs = [(losses[i] - delta) * table.fhat[i] for i in range(n)]
        _, picks, res = select_min_linear(table, coeffs, budget)
        nodes += res.nodes
        lp_solves += res.lp_solves
        f = np.array([table.fhat[i][picks[i]] for i in range(n)])
        new_delta = float((losses @ f) / f.sum())
        if abs(new_delta - delta) <= 1e-14:
            return new_delta, picks, {"iterations": it + 1, "nodes": nodes,
                                      "lp_solves": lp_solves}
        delta = new_delta
    raise FdpError("fractional pattern selection did not converge")
