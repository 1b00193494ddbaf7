"""Dense bounded-variable primal simplex.

The planner relaxations are small (a few thousand variables at most) but most
of their structure lives in variable bounds rather than rows, so a simplex
that keeps nonbasic variables at either of their bounds needs far fewer rows
than a standard-form tableau. Two phases: artificial variables on every row
give a starting basis, then the real objective takes over.

Minimization convention throughout. Relations are "leq" or "eq"; upper bounds
may be +inf, lower bounds must be finite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import FdpError

__all__ = ["LpProblem", "LpResult", "solve_lp", "SimplexError"]

_AT_LB = 0
_AT_UB = 1
_BASIC = 2

_STALL_LIMIT = 500  # degenerate pivots tolerated before Bland's rule kicks in


class SimplexError(FdpError):
    pass


@dataclass
class LpProblem:
    """min c @ x  subject to  A x (<=|=) b  and  lb <= x <= ub."""

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    relations: list
    lb: np.ndarray
    ub: np.ndarray

    def validate(self) -> None:
        rows, cols = self.A.shape
        if not (len(self.c) == cols == len(self.lb) == len(self.ub)):
            raise SimplexError("column count mismatch")
        if not (len(self.b) == rows == len(self.relations)):
            raise SimplexError("row count mismatch")
        if not np.all(np.isfinite(self.lb)):
            raise SimplexError("lower bounds must be finite")
        if np.any(self.ub < self.lb - 1e-12):
            raise SimplexError("upper bound below lower bound")
        for rel in self.relations:
            if rel not in ("leq", "eq"):
                raise SimplexError(f"unknown relation {rel!r}")


@dataclass
class LpResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None
    fun: float | None
    reduced_costs: np.ndarray | None = None
    var_status: np.ndarray | None = None
    iterations: int = 0


class _Tableau:
    """Shifted problem: variables x' = x - lb in [0, span], span possibly inf.

    Keeps T = B^-1 A_full, basic values, and the at-lower/at-upper status of
    every column. Artificial columns sit after the structural ones and are
    never allowed to enter the basis again once they leave.
    """

    def __init__(self, A_full: np.ndarray, rhs: np.ndarray, span: np.ndarray,
                 n_struct: int, tol: float):
        rows = A_full.shape[0]
        self.T = A_full.astype(float, copy=True)
        self.span = span
        self.n_struct = n_struct
        self.tol = tol
        self.basis = np.arange(n_struct, n_struct + rows)
        self.status = np.full(A_full.shape[1], _AT_LB, dtype=np.int8)
        self.status[self.basis] = _BASIC
        self.xB = rhs.astype(float, copy=True)
        self.iterations = 0

    def current_x(self) -> np.ndarray:
        x = np.where((self.status == _AT_UB) & np.isfinite(self.span),
                     self.span, 0.0)
        x[self.basis] = self.xB
        return x

    def _entering(self, zrow: np.ndarray, bland: bool) -> int | None:
        red = zrow[: self.n_struct]
        stat = self.status[: self.n_struct]
        eligible = ((stat == _AT_LB) & (red < -self.tol)) | (
            (stat == _AT_UB) & (red > self.tol))
        idx = np.nonzero(eligible)[0]
        if idx.size == 0:
            return None
        if bland:
            return int(idx[0])
        return int(idx[np.argmax(np.abs(red[idx]))])

    def _ratio_test(self, j: int, sigma: float, bland: bool):
        """Largest step for column j moving by sigma and what blocks it.

        Returns (delta, row, leaving_status); row == -1 means the entering
        variable flips to its other bound, row None means unbounded.
        """
        move = sigma * self.T[:, j]
        limits = np.full(len(self.xB), np.inf)
        to = np.full(len(self.xB), _AT_LB, dtype=np.int8)
        dec = move > self.tol
        limits[dec] = self.xB[dec] / move[dec]
        gaps = self.span[self.basis] - self.xB
        inc = (move < -self.tol) & np.isfinite(gaps)
        limits[inc] = gaps[inc] / (-move[inc])
        to[inc] = _AT_UB
        limits = np.maximum(limits, 0.0)
        rmin = float(limits.min()) if limits.size else np.inf
        own = self.span[j]
        if np.isfinite(own) and own <= rmin:
            return float(own), -1, _AT_LB
        if not np.isfinite(rmin):
            return None, None, None
        tied = np.nonzero(limits <= rmin + self.tol)[0]
        if bland:
            row = int(tied[np.argmin(self.basis[tied])])
        else:
            row = int(tied[np.argmax(np.abs(move[tied]))])
        return max(rmin, 0.0), row, int(to[row])

    def _apply_pivot(self, zrow: np.ndarray, r: int, j: int) -> None:
        self.T[r] /= self.T[r, j]
        col = self.T[:, j].copy()
        col[r] = 0.0
        self.T -= np.outer(col, self.T[r])
        zrow -= zrow[j] * self.T[r]

    def run(self, zrow: np.ndarray, max_iter: int) -> str:
        stall = 0
        bland = False
        while self.iterations < max_iter:
            j = self._entering(zrow, bland)
            if j is None:
                return "optimal"
            sigma = 1.0 if self.status[j] == _AT_LB else -1.0
            delta, row, leave_to = self._ratio_test(j, sigma, bland)
            if delta is None:
                return "unbounded"
            self.xB -= sigma * self.T[:, j] * delta
            if row == -1:
                self.status[j] = _AT_UB if sigma > 0 else _AT_LB
            else:
                out = self.basis[row]
                enter_from = 0.0 if self.status[j] == _AT_LB else self.span[j]
                self.xB[row] = enter_from + sigma * delta
                self.status[out] = leave_to
                self.status[j] = _BASIC
                self.basis[row] = j
                self._apply_pivot(zrow, row, j)
            self.iterations += 1
            if delta <= 1e-11:
                stall += 1
                if stall > _STALL_LIMIT:
                    bland = True
            else:
                stall = 0
                bland = False
        raise SimplexError(f"iteration limit {max_iter} reached")

    def force_out_artificials(self, zrow: np.ndarray) -> None:
        """Pivot basic artificials (all at value ~0) onto structural columns.

        Rows whose structural part is entirely zero are redundant; their
        artificial stays basic at zero and never moves again because every
        later pivot happens on a structural column, where this row is zero.
        """
        for r in range(len(self.basis)):
            if self.basis[r] < self.n_struct:
                continue
            row = self.T[r, : self.n_struct]
            ok = (np.abs(row) > 1e-7) & (self.status[: self.n_struct] != _BASIC)
            candidates = np.nonzero(ok)[0]
            if candidates.size == 0:
                continue
            j = int(candidates[np.argmax(np.abs(row[candidates]))])
            out = self.basis[r]
            enter_val = 0.0 if self.status[j] == _AT_LB else self.span[j]
            self.status[out] = _AT_LB
            self.status[j] = _BASIC
            self.basis[r] = j
            self.xB[r] = enter_val
            self._apply_pivot(zrow, r, j)


def solve_lp(problem: LpProblem, tol: float = 1e-9,
             max_iter: int | None = None) -> LpResult:
    """Two-phase simplex for an LpProblem. See the module docstring."""
    problem.validate()
    rows, ncols = problem.A.shape
    lb = np.asarray(problem.lb, dtype=float)
    ub = np.asarray(problem.ub, dtype=float)

    # One slack per inequality row, shift x by lb, flip rows until the
    # right-hand side is nonnegative, then append artificial columns.
    leq = np.array([rel == "leq" for rel in problem.relations], dtype=bool)
    n_slack = int(leq.sum())
    A_work = np.zeros((rows, ncols + n_slack))
    A_work[:, :ncols] = problem.A
    col = ncols
    for i in np.nonzero(leq)[0]:
        A_work[i, col] = 1.0
        col += 1
    rhs = problem.b - problem.A @ lb
    flip = rhs < 0
    A_work[flip] *= -1.0
    rhs = np.abs(rhs)

    n_struct = ncols + n_slack
    A_full = np.hstack([A_work, np.eye(rows)])
    span_full = np.concatenate([ub - lb, np.full(n_slack + rows, np.inf)])
    tab = _Tableau(A_full, rhs, span_full, n_struct, tol)
    if max_iter is None:
        max_iter = 2000 + 60 * (rows + n_struct)

    # Phase 1: minimize the artificial sum. With the artificial basis the
    # reduced cost of a structural column is minus its column sum.
    z1 = np.zeros(n_struct + rows)
    z1[:n_struct] = -A_full[:, :n_struct].sum(axis=0)
    if tab.run(z1, max_iter) == "unbounded":
        raise SimplexError("phase 1 reported unbounded")
    art = tab.basis >= n_struct
    phase1_obj = float(tab.xB[art].sum()) if np.any(art) else 0.0
    if phase1_obj > 1e-7 * (1.0 + float(np.abs(rhs).sum())):
        return LpResult(status="infeasible", x=None, fun=None,
                        iterations=tab.iterations)
    tab.force_out_artificials(z1)

    # Phase 2: the real objective.
    c_full = np.zeros(n_struct + rows)
    c_full[:ncols] = problem.c
    z2 = c_full - c_full[tab.basis] @ tab.T
    if tab.run(z2, max_iter) == "unbounded":
        return LpResult(status="unbounded", x=None, fun=None,
                        iterations=tab.iterations)
    x = tab.current_x()[:ncols] + lb
    return LpResult(status="optimal", x=x, fun=float(problem.c @ x),
                    reduced_costs=z2[:ncols].copy(),
                    var_status=tab.status[:ncols].copy(),
                    iterations=tab.iterations)
