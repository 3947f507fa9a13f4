import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from echosculpt.simplex import IterationLimitError, LpProblem, Status, certificate_holds, solve_lp


def vertex_min(A, b, c, tol=1e-9):
    """Smallest objective over all basic feasible solutions (None if there are none)."""
    m, n = A.shape
    rank = np.linalg.matrix_rank(A)
    best = None
    for cols in itertools.combinations(range(n), rank):
        sub = A[:, cols]
        if np.linalg.matrix_rank(sub) < rank:
            continue
        x_sub, *_ = np.linalg.lstsq(sub, b, rcond=None)
        if np.abs(sub @ x_sub - b).max() > tol * max(1, np.abs(b).max()) or x_sub.min() < -tol:
            continue
        val = float(c[list(cols)] @ x_sub)
        best = val if best is None else min(best, val)
    return best


def _random_sign_lp(rng, m, n):
    A = rng.choice([-1.0, 1.0], size=(m, n))
    x = np.zeros(n)
    support = rng.choice(n, size=min(n, m + 1), replace=False)
    x[support] = rng.uniform(0.1, 2.0, support.size)
    return A, A @ x


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 5), st.integers(0, 8), st.integers(0, 2**32 - 1))
def test_matches_vertex_enumeration(m, extra, seed):
    rng = np.random.default_rng(seed)
    n = min(m + extra + 1, 14)
    A, b = _random_sign_lp(rng, m, n)
    c = np.ones(n)
    prob = LpProblem(A, b)
    sol = solve_lp(prob)
    ref = vertex_min(A, b, c)
    assert sol.status is Status.OPTIMAL and ref is not None
    assert sol.objective == pytest.approx(ref, rel=1e-9, abs=1e-12)
    assert certificate_holds(prob, sol)
    assert np.count_nonzero(sol.x > 1e-12) <= m


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.integers(2, 12), st.integers(0, 2**32 - 1))
def test_column_permutation_invariance(m, n, seed):
    rng = np.random.default_rng(seed)
    A, b = _random_sign_lp(rng, m, n)
    perm = rng.permutation(n)
    a = solve_lp(LpProblem(A, b))
    p = solve_lp(LpProblem(A[:, perm], b))
    assert a.objective == pytest.approx(p.objective, rel=1e-9, abs=1e-12)


def test_redundant_and_negative_rows():
    A = np.array([[1.0, 1.0, 1.0], [2.0, 2.0, 2.0], [1.0, -1.0, 0.0]])
    b = np.array([-3.0, -6.0, 1.0])
    # x >= 0 cannot reach a negative sum
    assert solve_lp(LpProblem(A, b)).status is Status.INFEASIBLE
    b = np.array([3.0, 6.0, 1.0])
    prob = LpProblem(A, b)
    sol = solve_lp(prob)
    assert sol.optimal and sol.objective == pytest.approx(3.0)
    assert sol.info["redundant_rows"] == 1
    assert certificate_holds(prob, sol)


def test_infeasible_and_unbounded():
    assert solve_lp(LpProblem([[1.0, 1.0]], [-1.0])).status is Status.INFEASIBLE
    assert solve_lp(LpProblem([[0.0, 0.0]], [1.0])).status is Status.INFEASIBLE
    assert solve_lp(LpProblem([[1.0, -1.0]], [1.0], c=[0.0, -1.0])).status is Status.UNBOUNDED


def test_degenerate_cycling_example_terminates():
    # a classic cycling instance for Dantzig pricing with lowest-index ties
    A = np.array(
        [
            [0.25, -8.0, -1.0, 9.0, 1.0, 0.0, 0.0],
            [0.5, -12.0, -0.5, 3.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        ]
    )
    b = np.array([0.0, 0.0, 1.0])
    c = np.array([-0.75, 20.0, -0.5, 6.0, 0.0, 0.0, 0.0])
    prob = LpProblem(A, b, c)
    sol = solve_lp(prob)
    assert sol.optimal
    assert sol.objective == pytest.approx(vertex_min(A, b, c), abs=1e-12)
    assert certificate_holds(prob, sol)


def test_highly_degenerate_sign_lp():
    # every column of a 6-spin coupling matrix with a zero right-hand side
    rng = np.random.default_rng(3)
    A = rng.choice([-1.0, 1.0], size=(8, 60))
    sol = solve_lp(LpProblem(A, np.zeros(8)))
    assert sol.optimal and sol.objective == 0.0 and not sol.x.any()


def test_iteration_limit():
    rng = np.random.default_rng(0)
    A, b = _random_sign_lp(rng, 6, 40)
    with pytest.raises(IterationLimitError):
        solve_lp(LpProblem(A, b), max_iter=1)


def test_certificate_detects_bad_duals():
    A = np.array([[1.0, 1.0], [1.0, -1.0]])
    prob = LpProblem(A, [2.0, 0.0])
    sol = solve_lp(prob)
    assert certificate_holds(prob, sol)
    sol.dual = sol.dual + 1.0
    assert not certificate_holds(prob, sol)


def test_dimension_checks():
    with pytest.raises(ValueError):
        LpProblem(np.ones((2, 3)), np.ones(3))
    with pytest.raises(ValueError):
        LpProblem(np.ones((1, 2)), [np.nan])
