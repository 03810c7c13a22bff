"""Box-constrained LP solver against hand examples and vertex enumeration."""

import numpy as np
import pytest

from confope import BoxEqualityLP, solve, solve_bruteforce
from confope.lp import box_simplex_min


def test_hand_knapsack_example():
    # minimize 0.5*w1 subject to 0.5*w1 + 0.5*w2 = 1, 0.75 <= w <= 1.5
    lp = BoxEqualityLP(
        c=np.array([0.5, 0.0]),
        lo=np.array([0.75, 0.75]),
        hi=np.array([1.5, 1.5]),
        A=np.array([[0.5, 0.5]]),
        b=np.array([1.0]),
    )
    sol = solve(lp)
    assert sol.status == "optimal"
    assert np.allclose(sol.w, [0.75, 1.25], atol=1e-12)
    assert sol.objective == pytest.approx(0.375, abs=1e-12)


def _random_lp(rng, general):
    n = int(rng.integers(2, 6))
    m = int(rng.integers(1, 3)) if general else 1
    lo = rng.uniform(-1.0, 0.5, size=n)
    hi = lo + rng.uniform(0.1, 1.5, size=n)
    if general:
        A = rng.normal(size=(m, n))
    else:
        A = rng.uniform(0.1, 2.0, size=(1, n))
    w0 = lo + rng.uniform(0.0, 1.0, size=n) * (hi - lo)  # guarantees feasibility
    b = A @ w0
    c = rng.normal(size=n)
    return BoxEqualityLP(c=c, lo=lo, hi=hi, A=A, b=b)


@pytest.mark.parametrize("general", [False, True])
def test_matches_vertex_enumeration(general):
    rng = np.random.default_rng(3 if general else 4)
    for _ in range(100):
        lp = _random_lp(rng, general)
        fast = solve(lp)
        oracle = solve_bruteforce(lp)
        assert fast.status == "optimal"
        assert oracle.status == "optimal"
        assert abs(fast.objective - oracle.objective) <= 1e-8


def test_redundant_equality_row():
    lp = BoxEqualityLP(
        c=np.array([1.0, 2.0, -1.0]),
        lo=np.zeros(3),
        hi=np.ones(3),
        A=np.array([[1.0, 1.0, 1.0], [2.0, 2.0, 2.0]]),
        b=np.array([1.5, 3.0]),
    )
    sol = solve(lp)
    assert sol.status == "optimal"
    # optimum puts w3 = 1 (cost -1) and the remaining 0.5 on the cheapest rest
    assert sol.objective == pytest.approx(-0.5, abs=1e-9)


def test_cost_scaling_scales_objective():
    rng = np.random.default_rng(9)
    lp = _random_lp(rng, general=False)
    base = solve(lp).objective
    scaled = solve(BoxEqualityLP(3.0 * lp.c, lp.lo, lp.hi, lp.A, lp.b)).objective
    assert abs(scaled - 3.0 * base) <= 1e-9


def test_infeasible_budget_detected():
    lp = BoxEqualityLP(
        c=np.array([1.0, 1.0]),
        lo=np.array([0.0, 0.0]),
        hi=np.array([0.2, 0.2]),
        A=np.array([[1.0, 1.0]]),
        b=np.array([1.0]),   # box tops out at 0.4
    )
    assert solve(lp).infeasible
    assert solve_bruteforce(lp).infeasible


def test_box_simplex_min_tie_break_is_deterministic():
    # equal costs: the filler must prefer lower indices (stable sort)
    y = np.array([1.0, 1.0, 2.0])
    lo = np.zeros(3)
    hi = np.array([0.6, 0.6, 0.6])
    val, x = box_simplex_min(y, lo, hi)
    assert np.allclose(x, [0.6, 0.4, 0.0], atol=1e-12)
    assert val == pytest.approx(1.0, abs=1e-12)


def test_box_simplex_min_batched():
    y = np.array([0.0, 1.0])
    lo = np.array([[0.0, 0.0], [0.4, 0.4]])
    hi = np.array([[1.0, 1.0], [0.6, 0.6]])
    vals, x = box_simplex_min(y, lo, hi)
    assert vals[0] == pytest.approx(0.0, abs=1e-12)   # all mass on the free coord
    assert vals[1] == pytest.approx(0.4, abs=1e-12)   # pinned near uniform
    assert np.allclose(x.sum(axis=-1), 1.0, atol=1e-12)
