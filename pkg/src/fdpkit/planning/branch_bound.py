"""Best-first branch and bound over LP relaxations with bounded variables.

Minimization convention, matching the simplex. Two closure rules exist
because some relaxations stay loose at integer points:

* without `leaf_value`, a node whose LP optimum is integral is solved
  exactly by that LP (the usual situation);
* with `leaf_value`, the relaxation may undervalue integer points (the
  planner models drop their fill-ordering binaries in this mode), so an
  integral LP optimum only yields an incumbent via the callback. The node
  closes once the callback value meets the node bound or every integer
  variable is pinned by the node box, and otherwise branching continues on
  integral variables, where the child agreeing with the LP optimum inherits
  it without a second solve.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field

import numpy as np

from .simplex import LpProblem, LpResult, solve_lp

__all__ = ["MilpResult", "solve_milp"]


@dataclass
class MilpResult:
    status: str  # "optimal" | "infeasible" | "node_limit"
    x: np.ndarray | None
    fun: float | None
    bound: float
    nodes: int = 0
    lp_solves: int = 0
    payload: object = None


@dataclass(order=True)
class _Node:
    bound: float
    seq: int
    lb: np.ndarray = field(compare=False)
    ub: np.ndarray = field(compare=False)
    x: np.ndarray = field(compare=False)


def _fractional(x: np.ndarray, integer_idx: np.ndarray, int_tol: float):
    vals = x[integer_idx]
    frac = np.abs(vals - np.round(vals))
    return frac > int_tol


def _choose_branch(x, integer_idx, mask, priority, int_tol):
    """Pick the branching variable among `mask`-flagged integer positions.

    Lowest priority class first, then the most fractional value, then the
    lowest index, so runs are fully deterministic.
    """
    cand = np.nonzero(mask)[0]
    prios = priority[cand]
    cand = cand[prios == prios.min()]
    vals = x[integer_idx[cand]]
    dist = np.minimum(vals - np.floor(vals), np.ceil(vals) - vals)
    return int(cand[np.argmax(dist)])


def solve_milp(problem: LpProblem, integer_idx, *, leaf_value=None,
               branch_priority=None, incumbent_value: float = np.inf,
               incumbent_x: np.ndarray | None = None,
               incumbent_payload=None, int_tol: float = 1e-6,
               gap_tol: float = 1e-9, node_limit: int = 200_000) -> MilpResult:
    """Solve min c@x over the LpProblem with x[integer_idx] integral.

    `leaf_value(x) -> (value, payload)` evaluates an integral point exactly;
    see the module docstring for when it is required. `branch_priority`
    ranks integer positions (lower branches first). An externally known
    feasible objective can be passed through `incumbent_value` (with its
    point and payload) to prune from the start.
    """
    integer_idx = np.asarray(integer_idx, dtype=int)
    if branch_priority is None:
        branch_priority = np.zeros(len(integer_idx))
    else:
        branch_priority = np.asarray(branch_priority, dtype=float)
    best_val = float(incumbent_value)
    best_x = None if incumbent_x is None else np.asarray(incumbent_x, float)
    best_payload = incumbent_payload

    lp_solves = 0
    nodes = 0
    seq = itertools.count()

    def _solve(lb, ub) -> LpResult:
        nonlocal lp_solves
        lp_solves += 1
        sub = LpProblem(c=problem.c, A=problem.A, b=problem.b,
                        relations=problem.relations, lb=lb, ub=ub)
        return solve_lp(sub)

    root = _solve(problem.lb, problem.ub)
    if root.status == "infeasible":
        return MilpResult(status="infeasible", x=best_x, fun=None,
                          bound=np.inf, nodes=1, lp_solves=lp_solves)
    if root.status == "unbounded":
        return MilpResult(status="optimal", x=None, fun=-np.inf, bound=-np.inf,
                          nodes=1, lp_solves=lp_solves)
    heap: list[_Node] = []
    heapq.heappush(heap, _Node(root.fun, next(seq),
                               problem.lb.copy(), problem.ub.copy(), root.x))

    final_bound = root.fun
    while heap:
        node = heapq.heappop(heap)
        final_bound = max(final_bound, node.bound)
        if node.bound >= best_val - gap_tol:
            final_bound = best_val
            break
        nodes += 1
        if nodes > node_limit:
            return MilpResult(status="node_limit", x=best_x,
                              fun=best_val if best_x is not None else None,
                              bound=node.bound, nodes=nodes,
                              lp_solves=lp_solves, payload=best_payload)
        x = node.x
        frac_mask = _fractional(x, integer_idx, int_tol)
        if not np.any(frac_mask):
            # Integral point. Snap, evaluate, maybe close, else keep
            # branching on variables the node box leaves free.
            snapped = x.copy()
            snapped[integer_idx] = np.round(snapped[integer_idx])
            if leaf_value is None:
                if node.bound < best_val:
                    best_val, best_x, best_payload = node.bound, snapped, None
                continue
            val, payload = leaf_value(snapped)
            if val < best_val:
                best_val, best_x, best_payload = val, snapped, payload
            free = node.ub[integer_idx] - node.lb[integer_idx] > int_tol
            if val <= node.bound + gap_tol or not np.any(free):
                continue
            j = _choose_branch(x, integer_idx, free, branch_priority, int_tol)
            var = integer_idx[j]
            here = float(np.round(x[var]))
            # the child agreeing with the LP optimum inherits it, siblings
            # take the rest of the node's range on either side
            lb2, ub2 = node.lb.copy(), node.ub.copy()
            lb2[var] = ub2[var] = here
            heapq.heappush(heap, _Node(node.bound, next(seq), lb2, ub2, x))
            lo, hi = node.lb[var], node.ub[var]
            for lo2, hi2 in ((lo, here - 1.0), (here + 1.0, hi)):
                if lo2 > hi2 + 1e-12:
                    continue
                lb3, ub3 = node.lb.copy(), node.ub.copy()
                lb3[var], ub3[var] = lo2, hi2
                res = _solve(lb3, ub3)
                if res.status == "optimal" and res.fun < best_val - gap_tol:
                    heapq.heappush(heap, _Node(res.fun, next(seq),
                                               lb3, ub3, res.x))
            continue
        j = _choose_branch(x, integer_idx, frac_mask, branch_priority, int_tol)
        var = integer_idx[j]
        split = x[var]
        for lo2, hi2 in ((node.lb[var], np.floor(split)),
                         (np.ceil(split), node.ub[var])):
            if lo2 > hi2 + 1e-12:
                continue
            lb2, ub2 = node.lb.copy(), node.ub.copy()
            lb2[var], ub2[var] = lo2, hi2
            res = _solve(lb2, ub2)
            if res.status == "optimal" and res.fun < best_val - gap_tol:
                heapq.heappush(heap, _Node(res.fun, next(seq), lb2, ub2, res.x))
    else:
        final_bound = best_val if np.isfinite(best_val) else final_bound

    if not np.isfinite(best_val):
        return MilpResult(status="infeasible", x=None, fun=None,
                          bound=final_bound, nodes=nodes, lp_solves=lp_solves)
    # x may be None when only the seeded incumbent survived; the payload
    # still identifies the solution in the caller's own terms.
    return MilpResult(status="optimal", x=best_x, fun=best_val,
                      bound=min(final_bound, best_val), nodes=nodes,
                      lp_solves=lp_solves, payload=best_payload)
