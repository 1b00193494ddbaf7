"""Bounded-variable simplex solver, checked against vertex enumeration."""

import itertools

import numpy as np
import pytest

from fdpkit.planning import LpProblem, SimplexError, solve_lp


def lp(c, A, b, relations, lb=None, ub=None):
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    ncols = len(c)
    lb = np.zeros(ncols) if lb is None else np.asarray(lb, dtype=float)
    ub = np.ones(ncols) if ub is None else np.asarray(ub, dtype=float)
    return LpProblem(c=c, A=A, b=b, relations=list(relations), lb=lb, ub=ub)


def enumerate_vertices(problem):
    """All basic points of a small LP: every square subsystem of tight rows.

    Candidate tight rows are the constraint rows (taken at equality) and the
    variable bounds. Infeasible and singular choices are discarded. Slow and
    exact, which is what an oracle should be.
    """
    ncols = len(problem.c)
    rows = [(np.asarray(a, dtype=float), float(bi))
            for a, bi in zip(problem.A, problem.b)]
    for j in range(ncols):
        e = np.zeros(ncols)
        e[j] = 1.0
        rows.append((e.copy(), float(problem.lb[j])))
        if np.isfinite(problem.ub[j]):
            rows.append((e.copy(), float(problem.ub[j])))
    vertices = []
    for chosen in itertools.combinations(range(len(rows)), ncols):
        M = np.array([rows[i][0] for i in chosen])
        v = np.array([rows[i][1] for i in chosen])
        if abs(np.linalg.det(M)) < 1e-10:
            continue
        x = np.linalg.solve(M, v)
        if np.any(x < problem.lb - 1e-9) or np.any(x > problem.ub + 1e-9):
            continue
        ok = True
        for (a, bi), rel in zip(rows[: len(problem.b)], problem.relations):
            lhs = float(a @ x)
            if rel == "eq" and abs(lhs - bi) > 1e-9:
                ok = False
            if rel == "leq" and lhs > bi + 1e-9:
                ok = False
        if ok:
            vertices.append(x)
    return vertices


def oracle_min(problem):
    vertices = enumerate_vertices(problem)
    if not vertices:
        return None
    return min(float(problem.c @ v) for v in vertices)


# -- hand cases --------------------------------------------------------------


def test_simple_box_lp():
    problem = lp(c=[-1.0, -1.0], A=[[1.0, 1.0]], b=[1.0], relations=["leq"])
    res = solve_lp(problem)
    assert res.status == "optimal"
    assert res.fun == pytest.approx(-1.0, abs=1e-9)
    assert res.x.sum() == pytest.approx(1.0, abs=1e-9)


def test_equality_constraint_is_binding():
    problem = lp(c=[1.0, 2.0], A=[[1.0, 1.0]], b=[0.7], relations=["eq"])
    res = solve_lp(problem)
    assert res.status == "optimal"
    # cheapest way to reach the hyperplane puts everything on x0
    np.testing.assert_allclose(res.x, [0.7, 0.0], atol=1e-9)


def test_infeasible_detected():
    problem = lp(c=[1.0], A=[[1.0]], b=[2.0], relations=["eq"])  # x <= 1
    assert solve_lp(problem).status == "infeasible"


def test_unbounded_detected():
    problem = LpProblem(
        c=np.array([-1.0]), A=np.zeros((0, 1)), b=np.zeros(0), relations=[],
        lb=np.zeros(1), ub=np.array([np.inf]))
    assert solve_lp(problem).status == "unbounded"


def test_degenerate_lp_terminates():
    # many redundant rows through one vertex; Bland's rule must not cycle
    problem = lp(c=[-1.0, -1.0, -1.0],
                 A=[[1, 1, 0], [0, 1, 1], [1, 0, 1], [1, 1, 1]],
                 b=[1.0, 1.0, 1.0, 1.5],
                 relations=["leq"] * 4)
    res = solve_lp(problem)
    assert res.status == "optimal"
    assert res.fun == pytest.approx(-1.5, abs=1e-9)


def test_validation_rejects_shape_mismatch():
    with pytest.raises(SimplexError):
        LpProblem(c=np.ones(2), A=np.ones((1, 3)), b=np.ones(1),
                  relations=["leq"], lb=np.zeros(2),
                  ub=np.ones(2)).validate()


# -- randomized comparison against the oracle --------------------------------


def test_random_lps_match_vertex_enumeration():
    rng = np.random.default_rng(0)
    solved = 0
    for trial in range(120):
        ncols = int(rng.integers(1, 4))
        nrows = int(rng.integers(0, 4))
        problem = lp(
            c=rng.uniform(-2, 2, ncols),
            A=rng.uniform(-1, 2, (nrows, ncols)),
            b=rng.uniform(-0.5, 2, nrows),
            relations=[("leq", "eq")[rng.integers(2)] for _ in range(nrows)])
        res = solve_lp(problem)
        want = oracle_min(problem)
        if want is None:
            # no vertex: for a bounded-box LP this means infeasible
            assert res.status == "infeasible", trial
            continue
        assert res.status == "optimal", trial
        assert res.fun == pytest.approx(want, abs=1e-7), trial
        # returned point must itself be feasible
        assert np.all(res.x >= problem.lb - 1e-9)
        assert np.all(res.x <= problem.ub + 1e-9)
        for a, bi, rel in zip(problem.A, problem.b, problem.relations):
            lhs = float(a @ res.x)
            assert lhs <= bi + 1e-7 if rel == "leq" else abs(lhs - bi) < 1e-7
        solved += 1
    assert solved > 60  # the draw must not be dominated by infeasible cases


def test_tight_budget_row_stays_respected():
    """Regression guard: a binding <= row must hold at the reported point."""
    problem = lp(c=[-3.0, -2.0, -1.0],
                 A=[[2.0, 1.5, 0.5]], b=[1.0], relations=["leq"])
    res = solve_lp(problem)
    assert res.status == "optimal"
    assert float(problem.A[0] @ res.x) <= 1.0 + 1e-9
