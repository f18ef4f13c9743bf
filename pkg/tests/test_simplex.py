"""Two-phase simplex: textbook problems, status detection, random LPs vs a
vertex-enumeration oracle and scipy, anti-cycling, and certificates."""
import itertools

import numpy as np
import pytest
from scipy.optimize import linprog

from scendiff import simplex as spx
from scendiff.errors import DimensionError, IterationLimitError, ParameterError
from scendiff.simplex import LPProblem, simplex_solve, verify_certificate


def _vertex_oracle(lp: LPProblem) -> float:
    """Minimum objective over all basic feasible solutions.

    Valid whenever the feasible region is bounded (every optimum is then
    attained at a vertex, and every vertex is a basic solution).
    """
    a, b, c = lp.a, lp.b, lp.c
    m, n = a.shape
    best = np.inf
    for cols in itertools.combinations(range(n), m):
        bmat = a[:, cols]
        if abs(np.linalg.det(bmat)) < 1e-10:
            continue
        xb = np.linalg.solve(bmat, b)
        if np.all(xb >= -1e-9):
            best = min(best, float(c[list(cols)] @ xb))
    return best


def _random_bounded_lp(rng: np.random.Generator) -> LPProblem:
    """Random equality-form LP with a known interior feasible point and a
    box row that keeps the region bounded (so vertex enumeration applies)."""
    m = int(rng.integers(2, 5))
    n = m + int(rng.integers(2, 5))
    a = rng.uniform(-2, 2, (m, n))
    x_feas = rng.uniform(0.5, 2.0, n)
    b = a @ x_feas
    cap = float(x_feas.sum() * (2.0 + rng.uniform(0, 1)))
    a_ext = np.zeros((m + 1, n + 1))
    a_ext[:m, :n] = a
    a_ext[m, :n] = 1.0
    a_ext[m, n] = 1.0  # slack of the budget row
    b_ext = np.concatenate([b, [cap]])
    c_ext = np.concatenate([rng.uniform(-1, 1, n), [0.0]])
    return LPProblem(c=c_ext, a=a_ext, b=b_ext)


# ------------------------------------------------------------------ textbook


def test_textbook_production_problem():
    """max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36."""
    c = np.array([-3.0, -5.0, 0.0, 0.0, 0.0])
    a = np.array([
        [1.0, 0.0, 1.0, 0.0, 0.0],
        [0.0, 2.0, 0.0, 1.0, 0.0],
        [3.0, 2.0, 0.0, 0.0, 1.0],
    ])
    b = np.array([4.0, 12.0, 18.0])
    lp = LPProblem(c=c, a=a, b=b, names={"x": 0, "y": 1})
    sol = simplex_solve(lp)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(-36.0, abs=1e-9)
    assert sol.value_of(lp, "x") == pytest.approx(2.0, abs=1e-9)
    assert sol.value_of(lp, "y") == pytest.approx(6.0, abs=1e-9)
    assert verify_certificate(lp, sol)["ok"]


def test_equality_diet_problem():
    """min 2x + 3y s.t. x + y = 4, x + 2y = 6 -> unique point (2, 2), 10."""
    lp = LPProblem(
        c=np.array([2.0, 3.0]),
        a=np.array([[1.0, 1.0], [1.0, 2.0]]),
        b=np.array([4.0, 6.0]),
    )
    sol = simplex_solve(lp)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(10.0, abs=1e-9)
    np.testing.assert_allclose(sol.x, [2.0, 2.0], atol=1e-9)


def test_negative_rhs_rows_are_normalized():
    """Same diet problem with both rows negated on entry."""
    lp = LPProblem(
        c=np.array([2.0, 3.0]),
        a=-np.array([[1.0, 1.0], [1.0, 2.0]]),
        b=-np.array([4.0, 6.0]),
    )
    sol = simplex_solve(lp)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(10.0, abs=1e-9)


def test_degenerate_vertex():
    """Redundantly constrained corner (b has a zero): still optimal."""
    c = np.array([-1.0, -1.0, 0.0, 0.0, 0.0])
    a = np.array([
        [1.0, 1.0, 1.0, 0.0, 0.0],
        [1.0, -1.0, 0.0, 1.0, 0.0],
        [-1.0, 1.0, 0.0, 0.0, 1.0],
    ])
    b = np.array([2.0, 0.0, 0.0])
    sol = simplex_solve(LPProblem(c=c, a=a, b=b))
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(-2.0, abs=1e-9)
    np.testing.assert_allclose(sol.x[:2], [1.0, 1.0], atol=1e-9)


def test_infeasible_contradictory_rows():
    lp = LPProblem(
        c=np.array([1.0, 1.0]),
        a=np.array([[1.0, 1.0], [1.0, 1.0]]),
        b=np.array([1.0, 2.0]),
    )
    sol = simplex_solve(lp)
    assert sol.status == "infeasible"
    assert np.isnan(sol.objective)
    with pytest.raises(ParameterError):
        verify_certificate(lp, sol)


def test_infeasible_negative_requirement():
    """x1 + x2 = -1 with x >= 0 has no solution."""
    sol = simplex_solve(LPProblem(
        c=np.array([0.0, 0.0]),
        a=np.array([[1.0, 1.0]]),
        b=np.array([-1.0]),
    ))
    assert sol.status == "infeasible"


def test_unbounded_direction():
    """min -x1 with x1 - x2 = 0: ray (t, t) drives the objective to -inf."""
    sol = simplex_solve(LPProblem(
        c=np.array([-1.0, 0.0]),
        a=np.array([[1.0, -1.0]]),
        b=np.array([0.0]),
    ))
    assert sol.status == "unbounded"
    assert sol.objective == -np.inf


def test_redundant_row_is_dropped():
    """A duplicated constraint leaves a zero phase-1 row; the solver must
    discard it and still optimize."""
    c = np.array([1.0, 2.0, 0.0])
    a = np.array([
        [1.0, 1.0, 1.0],
        [1.0, 1.0, 1.0],
        [2.0, 2.0, 2.0],
    ])
    b = np.array([3.0, 3.0, 6.0])
    sol = simplex_solve(LPProblem(c=c, a=a, b=b))
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(0.0, abs=1e-9)  # all slack
    assert sol.x[2] == pytest.approx(3.0, abs=1e-9)


def test_beale_cycling_example_terminates():
    """Beale's degenerate problem cycles under naive Dantzig pricing; the
    stall-triggered Bland rule must terminate at the known optimum -1/20."""
    c = np.array([0.0, 0.0, 0.0, -0.75, 150.0, -0.02, 6.0])
    a = np.array([
        [1.0, 0.0, 0.0, 0.25, -60.0, -0.04, 9.0],
        [0.0, 1.0, 0.0, 0.50, -90.0, -0.02, 3.0],
        [0.0, 0.0, 1.0, 0.00, 0.0, 1.0, 0.0],
    ])
    b = np.array([0.0, 0.0, 1.0])
    lp = LPProblem(c=c, a=a, b=b)
    sol = simplex_solve(lp)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(-0.05, abs=1e-9)
    assert sol.iterations < 500
    assert verify_certificate(lp, sol)["ok"]


# ------------------------------------------------------------------- random


def test_random_lps_match_vertex_enumeration():
    rng = np.random.default_rng(42)
    for trial in range(20):
        lp = _random_bounded_lp(rng)
        sol = simplex_solve(lp)
        assert sol.status == "optimal", f"trial {trial}"
        want = _vertex_oracle(lp)
        assert sol.objective == pytest.approx(want, abs=1e-6), f"trial {trial}"
        cert = verify_certificate(lp, sol)
        assert cert["ok"], f"trial {trial}: {cert}"


def test_random_lps_match_scipy():
    rng = np.random.default_rng(7)
    n_unbounded = 0
    for trial in range(30):
        m = int(rng.integers(2, 6))
        n = m + int(rng.integers(1, 6))
        a = rng.uniform(-3, 3, (m, n))
        x_feas = rng.uniform(0.0, 2.0, n)
        b = a @ x_feas
        c = rng.uniform(-2, 2, n)
        lp = LPProblem(c=c, a=a, b=b)
        sol = simplex_solve(lp)
        ref = linprog(c, A_eq=a, b_eq=b, bounds=(0, None), method="highs")
        if sol.status == "unbounded":
            n_unbounded += 1
            assert ref.status == 3, f"trial {trial}: scipy disagrees on unboundedness"
        else:
            assert sol.status == "optimal"
            assert ref.status == 0, f"trial {trial}"
            assert sol.objective == pytest.approx(ref.fun, abs=1e-6), f"trial {trial}"
    assert n_unbounded < 30  # some instances must be bounded


def test_scipy_agrees_on_infeasible():
    a = np.array([[1.0, 1.0], [1.0, 1.0]])
    b = np.array([1.0, 2.0])
    c = np.zeros(2)
    assert simplex_solve(LPProblem(c=c, a=a, b=b)).status == "infeasible"
    assert linprog(c, A_eq=a, b_eq=b, bounds=(0, None), method="highs").status == 2


# ------------------------------------------------------------------- guards


def test_problem_validation():
    with pytest.raises(DimensionError):
        simplex_solve(LPProblem(c=np.zeros(3), a=np.zeros((2, 2)), b=np.zeros(2)))
    with pytest.raises(DimensionError):
        simplex_solve(LPProblem(c=np.zeros(2), a=np.zeros((2, 2)), b=np.zeros(3)))
    with pytest.raises(ParameterError):
        simplex_solve(LPProblem(c=np.array([np.inf, 0.0]),
                                a=np.ones((1, 2)), b=np.ones(1)))
    with pytest.raises(DimensionError):
        LPProblem(c=np.zeros(2), a=np.ones((1, 2)), b=np.ones(1),
                  names={"x": 5}).validate()


def test_iteration_limit(monkeypatch):
    monkeypatch.setattr(spx, "MAX_ITER", 1)
    lp = LPProblem(
        c=np.array([-3.0, -5.0, 0.0, 0.0, 0.0]),
        a=np.array([
            [1.0, 0.0, 1.0, 0.0, 0.0],
            [0.0, 2.0, 0.0, 1.0, 0.0],
            [3.0, 2.0, 0.0, 0.0, 1.0],
        ]),
        b=np.array([4.0, 12.0, 18.0]),
    )
    with pytest.raises(IterationLimitError, match="iterations"):
        simplex_solve(lp)


def test_certificate_rejects_corrupted_solution():
    lp = LPProblem(
        c=np.array([2.0, 3.0]),
        a=np.array([[1.0, 1.0], [1.0, 2.0]]),
        b=np.array([4.0, 6.0]),
    )
    sol = simplex_solve(lp)
    assert verify_certificate(lp, sol)["ok"]
    sol.x = sol.x + np.array([0.5, -0.25])
    cert = verify_certificate(lp, sol)
    assert not cert["ok"]
    assert cert["residual"] > 1e-3 or cert["min_x"] < -1e-9
