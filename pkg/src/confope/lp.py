"""Small dense LP solver for box-constrained variables with equality rows.

The workhorse case is a single budget constraint a^T w = b with positive
weights, which reduces by substitution to a fractional-knapsack waterfill and
is solved in O(n log n).  Anything more general falls back to scipy's HiGHS
simplex.  A vertex-enumeration oracle is provided for testing.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import DimensionError, InfeasibleError, ParameterError

#: single feasibility tolerance used throughout the solver
FEAS_TOL = 1e-9


@dataclass(frozen=True)
class BoxEqualityLP:
    """minimize c.w  subject to  A w = b,  lo <= w <= hi."""

    c: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    A: np.ndarray  # [m, n]
    b: np.ndarray  # [m]

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        n = c.shape[0]
        if lo.shape != (n,) or hi.shape != (n,):
            raise DimensionError("bounds must match cost dimension")
        if A.shape[1] != n or b.shape[0] != A.shape[0]:
            raise DimensionError("equality system shape mismatch")
        if np.any(lo > hi + FEAS_TOL):
            raise ParameterError("box has lo > hi")
        for name, val in (("c", c), ("lo", lo), ("hi", hi), ("A", A), ("b", b)):
            object.__setattr__(self, name, val)

    @property
    def n(self) -> int:
        return self.c.shape[0]

    @property
    def m(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class LPSolution:
    status: str  # "optimal" | "infeasible"
    w: np.ndarray | None
    objective: float

    @property
    def infeasible(self) -> bool:
        return self.status == "infeasible"


_INFEASIBLE = LPSolution("infeasible", None, float("nan"))


def box_simplex_min(y: np.ndarray, lo: np.ndarray, hi: np.ndarray, budget=1.0):
    """Minimize sum_i y_i x_i over {sum x = budget, lo <= x <= hi}, batched.

    `y` has shape (n,); `lo`/`hi` may carry leading batch dimensions.  Ties in
    y are broken by index ascending (stable sort) for determinism.  Returns
    (values, x).  Rows whose box cannot meet the budget get value +inf.
    """
    y = np.asarray(y, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    order = np.argsort(y, kind="stable")
    lo_s = lo[..., order]
    caps = hi[..., order] - lo_s
    caps = np.maximum(caps, 0.0)
    budget = np.asarray(budget, dtype=float)
    remaining = budget - lo.sum(axis=-1)
    cum_prev = np.cumsum(caps, axis=-1) - caps
    fill = np.clip(remaining[..., None] - cum_prev, 0.0, caps)
    x_s = lo_s + fill
    values = (x_s * y[order]).sum(axis=-1)
    total_cap = caps.sum(axis=-1)
    bad = (remaining < -FEAS_TOL) | (remaining > total_cap + FEAS_TOL)
    values = np.where(bad, np.inf, values)
    x = np.empty_like(x_s)
    x[..., order] = x_s
    return values, x


def _solve_knapsack(lp: BoxEqualityLP) -> LPSolution:
    """Single positive-weight equality: substitute v = a*w and waterfill."""
    a = lp.A[0]
    y = lp.c / a
    val, v = box_simplex_min(y, lp.lo * a, lp.hi * a, budget=float(lp.b[0]))
    if not np.isfinite(val):
        return _INFEASIBLE
    w = v / a
    return LPSolution("optimal", w, float(lp.c @ w))


def _solve_general(lp: BoxEqualityLP) -> LPSolution:
    res = linprog(
        lp.c,
        A_eq=lp.A,
        b_eq=lp.b,
        bounds=list(zip(lp.lo, lp.hi)),
        method="highs",
    )
    if res.status == 2:
        return _INFEASIBLE
    if res.status == 3:
        raise InfeasibleError("box-constrained LP reported unbounded")
    if not res.success:
        raise InfeasibleError(f"LP solver failed: {res.message}")
    return LPSolution("optimal", np.asarray(res.x), float(res.fun))


def solve(lp: BoxEqualityLP) -> LPSolution:
    """Solve the LP; returns an LPSolution with status "infeasible" rather
    than raising when no feasible point exists."""
    if lp.m == 1 and np.all(lp.A[0] > 0.0):
        return _solve_knapsack(lp)
    return _solve_general(lp)


def solve_bruteforce(lp: BoxEqualityLP) -> LPSolution:
    """Exact optimum by enumerating basic feasible points.  Test oracle only."""
    n, m = lp.n, lp.m
    if n > 8:
        raise ParameterError("brute-force oracle limited to dimension <= 8")
    best_obj = np.inf
    best_w = None
    indices = range(n)
    for free in itertools.combinations(indices, m):
        fixed = [i for i in indices if i not in free]
        A_free = lp.A[:, list(free)] if m else None
        for pattern in itertools.product((0, 1), repeat=len(fixed)):
            w = np.empty(n)
            for i, side in zip(fixed, pattern):
                w[i] = lp.lo[i] if side == 0 else lp.hi[i]
            if m:
                rhs = lp.b - lp.A[:, fixed] @ w[fixed] if fixed else lp.b.copy()
                try:
                    sol = np.linalg.solve(A_free, rhs)
                except np.linalg.LinAlgError:
                    continue
                w[list(free)] = sol
            if np.any(w < lp.lo - FEAS_TOL) or np.any(w > lp.hi + FEAS_TOL):
                continue
            if np.any(np.abs(lp.A @ w - lp.b) > 1e-8):
                continue
            obj = float(lp.c @ w)
            if obj < best_obj - 0.0:
                best_obj = obj
                best_w = w
    if best_w is None:
        return _INFEASIBLE
    return LPSolution("optimal", best_w, best_obj)
