"""Confounded fitted-Q-evaluation lower bounds.

Three iterations over the horizon: the nominal (unconfounded) tabular FQE,
the closed-form pessimistic weighting, and the per-(x,a) linear-program bound
whose variables are the reparameterized inverse behavior weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import EmpiricalModel
from .errors import DimensionError
from .lp import FEAS_TOL
from .mdp import PolicyTable, ValueTable
from .sensitivity import SensitivityParams, alpha_beta


@dataclass(frozen=True)
class FqeBoundResult:
    q_lower: ValueTable            # [X, A] at horizon T
    v_lower: ValueTable            # [X] at horizon T
    expected_lower: float          # chi . v_lower
    diagnostics: dict = field(default_factory=dict)


def _fallback_floor(model: EmpiricalModel, rewards: np.ndarray) -> float:
    """Globally pessimistic one-step reward for pairs never seen in the data:
    the smallest reward on any supported transition."""
    mask = model.support[:, :, None] & (model.p_hat > 0.0)
    if not mask.any():
        return float(rewards.min())
    return float(rewards[mask].min())


def _check_shapes(model: EmpiricalModel, rewards, initial_dist, pi_e: PolicyTable):
    X, A = model.n_states, model.n_actions
    if rewards.shape != (X, A, X):
        raise DimensionError("rewards shape does not match model")
    if initial_dist.shape != (X,):
        raise DimensionError("initial_dist shape does not match model")
    if pi_e.probs.shape != (X, A):
        raise DimensionError("pi_e shape does not match model")


def _iterate(model, rewards, gamma, initial_dist, pi_e, horizon, step_fn):
    """Shared horizon loop: apply step_fn for supported pairs, pessimistic
    fallback elsewhere, mix through pi_e."""
    rewards = np.asarray(rewards, dtype=float)
    initial_dist = np.asarray(initial_dist, dtype=float)
    _check_shapes(model, rewards, initial_dist, pi_e)
    X, A = model.n_states, model.n_actions
    r_floor = _fallback_floor(model, rewards)
    v = np.zeros(X)
    q = np.zeros((X, A))
    fallback_pairs = int((~model.support & (pi_e.probs > 0.0)).sum())
    for _ in range(horizon):
        q = step_fn(v)
        fallback = r_floor + gamma * v.min()
        q = np.where(model.support, q, fallback)
        v = np.einsum("xa,xa->x", pi_e.probs, q)
    expected = float(initial_dist @ v)
    return FqeBoundResult(
        q_lower=ValueTable(q, horizon=horizon),
        v_lower=ValueTable(v, horizon=horizon),
        expected_lower=expected,
        diagnostics={"fallback_pairs": fallback_pairs, "horizon": horizon},
    )


def nominal_fqe(model, rewards, gamma, initial_dist, pi_e, horizon) -> FqeBoundResult:
    """Unconfounded tabular FQE; exact policy evaluation under (P_hat, R)."""
    rewards = np.asarray(rewards, dtype=float)

    def step(v):
        return np.einsum(
            "xay,xay->xa", model.p_hat, rewards + gamma * v[None, None, :]
        )

    return _iterate(model, rewards, gamma, initial_dist, pi_e, horizon, step)


def naive_bound_step(
    model: EmpiricalModel,
    rewards: np.ndarray,
    gamma: float,
    pi_e: PolicyTable,
    q_prev: ValueTable,
    params: SensitivityParams,
) -> ValueTable:
    """One pessimistic-weighting step: weight beta on negative targets, alpha
    on nonnegative ones."""
    rewards = np.asarray(rewards, dtype=float)
    v_prev = np.einsum("xa,xa->x", pi_e.probs, q_prev.values)
    alpha, beta = alpha_beta(model.pi_hat, params.gamma)
    y = rewards + gamma * v_prev[None, None, :]
    weights = np.where(y < 0.0, beta[:, :, None], alpha[:, :, None])
    q = np.einsum("xay,xay->xa", model.p_hat, weights * y)
    return ValueTable(q, horizon=q_prev.horizon + 1)


def naive_fqe(model, rewards, gamma, initial_dist, pi_e, params, horizon) -> FqeBoundResult:
    """Iterated pessimistic-weighting lower bound over the full horizon."""
    rewards = np.asarray(rewards, dtype=float)
    alpha, beta = alpha_beta(model.pi_hat, params.gamma)

    def step(v):
        y = rewards + gamma * v[None, None, :]
        weights = np.where(y < 0.0, beta[:, :, None], alpha[:, :, None])
        return np.einsum("xay,xay->xa", model.p_hat, weights * y)

    return _iterate(model, rewards, gamma, initial_dist, pi_e, horizon, step)


def _rowwise_box_simplex_min(Y, lo, hi):
    """Per-row waterfill: minimize sum_j Y[i,j] v[i,j] with sum_j v[i,j] = 1
    and lo <= v <= hi, independently for each row i.  Ties in Y broken by
    column index ascending."""
    order = np.argsort(Y, axis=1, kind="stable")
    Y_s = np.take_along_axis(Y, order, axis=1)
    lo_s = np.take_along_axis(lo, order, axis=1)
    caps = np.take_along_axis(hi, order, axis=1) - lo_s
    caps = np.maximum(caps, 0.0)
    remaining = 1.0 - lo.sum(axis=1)
    cum_prev = np.cumsum(caps, axis=1) - caps
    fill = np.clip(remaining[:, None] - cum_prev, 0.0, caps)
    v_s = lo_s + fill
    values = (v_s * Y_s).sum(axis=1)
    bad = (remaining < -FEAS_TOL) | (remaining > caps.sum(axis=1) + FEAS_TOL)
    return values, bad


def confounded_fqe(
    model, rewards, gamma, initial_dist, pi_e, params: SensitivityParams, horizon
) -> FqeBoundResult:
    """The LP lower bound, iterated: at each step and each supported (x,a)
    minimize the reweighted Bellman target over inverse-propensity weights w
    with alpha <= w <= beta and P_hat^T w = 1 (solved in substituted form
    v = P_hat * w, which is a fractional-knapsack waterfill)."""
    rewards = np.asarray(rewards, dtype=float)
    alpha, beta = alpha_beta(model.pi_hat, params.gamma)
    X, A = model.n_states, model.n_actions
    P = model.p_hat.reshape(X * A, X)
    lo = alpha.reshape(X * A, 1) * P
    hi = beta.reshape(X * A, 1) * P
    infeasible_count = 0

    def step(v):
        nonlocal infeasible_count
        y = rewards + gamma * v[None, None, :]   # [X, A, X]
        Y = y.reshape(X * A, X)
        values, bad = _rowwise_box_simplex_min(Y, lo, hi)
        # w = 1 is always feasible, so the LP cannot be infeasible on support
        bad_supported = bad.reshape(X, A) & model.support
        assert not bad_supported.any(), "confounded FQE inner LP infeasible"
        return values.reshape(X, A)

    result = _iterate(model, rewards, gamma, initial_dist, pi_e, horizon, step)
    result.diagnostics["lp_infeasibilities"] = infeasible_count
    return result
