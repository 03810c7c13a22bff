"""S-rectangular robust bound: collapse, oracle agreement, certificates."""

import numpy as np
import pytest

from confope import (
    PolicyTable,
    SensitivityParams,
    StateUncertaintyProblem,
    confounded_fqe,
    load_env,
    nominal_fqe,
    robust_value_iteration,
    single_step_bound,
    solve_state,
    tightness_check,
)
from confope.sensitivity import odds_interval
from conftest import env_population


def _bound_args(env):
    model = env_population(env)
    return model, (model, env.mdp.rewards, env.mdp.discount,
                   env.mdp.initial_dist, env.pi_e)


@pytest.mark.parametrize("params", [
    SensitivityParams(gamma=1.0, delta=5.0),
    SensitivityParams(gamma=5.0, delta=1.0),
    SensitivityParams(gamma=5.0, delta=5.0, p=0.0),
    SensitivityParams(gamma=5.0, delta=5.0, p=1.0),
])
def test_collapse_cases_equal_nominal(params):
    env = load_env("toy")
    _, args = _bound_args(env)
    nom = nominal_fqe(*args, env.default_horizon).expected_lower
    res = robust_value_iteration(*args, params, env.default_horizon)
    assert abs(res.expected_lower - nom) <= 1e-12


def grid_oracle(pi, ph, y, pe, gamma, delta, p, n=1001):
    """Dense 2-d grid over (q0, P0) for the 2-state/2-action problem."""
    glo, ghi = odds_interval(pi, gamma)
    tlo, thi = odds_interval(ph, delta)
    best = np.inf
    for q0a in np.linspace(glo[0], ghi[0], n):
        q0 = np.array([q0a, 1.0 - q0a])
        q1 = (pi - (1.0 - p) * q0) / p
        if (np.any(q1 < glo - 1e-9) or np.any(q1 > ghi + 1e-9)
                or np.any(q0 < glo - 1e-9) or np.any(q0 > ghi + 1e-9)):
            continue
        total = 0.0
        feasible = True
        for a in range(2):
            best_a = np.inf
            for t0 in np.linspace(tlo[a, 0], thi[a, 0], n):
                P0 = np.array([t0, 1.0 - t0])
                P1 = (pi[a] * ph[a] - (1.0 - p) * q0[a] * P0) / (p * q1[a])
                if np.any(P1 < tlo[a] - 1e-6) or np.any(P1 > thi[a] + 1e-6):
                    continue
                best_a = min(best_a, pe[a] * (((1.0 - p) * P0 + p * P1) @ y[a]))
            if not np.isfinite(best_a):
                feasible = False
                break
            total += best_a
        if feasible:
            best = min(best, total)
    return best


def test_solve_state_matches_grid_oracle():
    rng = np.random.default_rng(0)
    params = SensitivityParams(gamma=2.0, delta=2.0, p=0.5)
    for _ in range(8):
        pi = rng.dirichlet(np.ones(2))
        ph = rng.dirichlet(np.ones(2), size=2)
        y = rng.normal(size=(2, 2))
        pe = rng.dirichlet(np.ones(2))
        prob = StateUncertaintyProblem(pi, ph, np.array([True, True]), pe, y,
                                       params, -10.0)
        v, mini, _ = solve_state(prob)
        oracle = grid_oracle(pi, ph, y, pe, 2.0, 2.0, 0.5)
        assert abs(v - oracle) <= 2e-3
        # the reported minimizer reproduces the reported value exactly
        marg = (1.0 - 0.5) * mini.P0 + 0.5 * mini.P1
        obj = float(np.einsum("a,aj,aj->", pe, marg, y))
        assert abs(obj - v) <= 1e-9


def test_candidate_model_is_valid_and_gap_nonnegative():
    env = load_env("toy")
    model, args = _bound_args(env)
    params = SensitivityParams(gamma=3.0, delta=2.0)
    res = robust_value_iteration(*args, params, env.default_horizon)
    res.candidate.validate(model, params)   # raises on violation
    gap = tightness_check(*args, params, env.default_horizon, res.candidate,
                          bound=res.expected_lower)
    assert gap >= -1e-9


def test_single_iteration_is_tight():
    for name in ("toy", "ope-graph"):
        env = load_env(name)
        _, args = _bound_args(env)
        params = SensitivityParams(gamma=4.0, delta=4.0)
        res = robust_value_iteration(*args, params, 1)
        gap = tightness_check(*args, params, 1, res.candidate,
                              bound=res.expected_lower)
        assert abs(gap) <= 1e-8


def test_single_step_dominates_full_robust():
    # confounding in one step is a subset of confounding in every step
    env = load_env("toy")
    _, args = _bound_args(env)
    for gamma in (2.0, 6.0):
        params = SensitivityParams(gamma=gamma, delta=3.0)
        full = robust_value_iteration(*args, params, env.default_horizon)
        single = single_step_bound(*args, params, env.default_horizon)
        assert single.expected_lower >= full.expected_lower - 1e-9


def test_robust_dominates_fqe_at_large_delta():
    env = load_env("ope-graph")
    _, args = _bound_args(env)
    for gamma in (1.5, 4.0):
        params = SensitivityParams(gamma=gamma, delta=1e6)
        rob = robust_value_iteration(*args, params, env.default_horizon)
        fqe = confounded_fqe(*args, params, env.default_horizon)
        assert rob.expected_lower >= fqe.expected_lower - 1e-9


def test_snapshots_are_consistent():
    env = load_env("toy")
    _, args = _bound_args(env)
    params = SensitivityParams(gamma=2.0, delta=2.0)
    res = robust_value_iteration(*args, params, 5, snapshot_horizons=(2, 5))
    assert set(res.snapshots) == {2, 5}
    assert res.snapshots[5][0] == pytest.approx(res.expected_lower, abs=1e-12)
    short = robust_value_iteration(*args, params, 2)
    assert res.snapshots[2][0] == pytest.approx(short.expected_lower, abs=1e-12)


def test_monotone_in_both_parameters():
    env = load_env("toy")
    _, args = _bound_args(env)
    values = {}
    for gamma in (1.0, 2.0, 4.0):
        for delta in (1.0, 2.0, 4.0):
            params = SensitivityParams(gamma=gamma, delta=delta)
            values[gamma, delta] = robust_value_iteration(
                *args, params, env.default_horizon
            ).expected_lower
    for gamma in (1.0, 2.0, 4.0):
        assert values[gamma, 2.0] <= values[gamma, 1.0] + 1e-9
        assert values[gamma, 4.0] <= values[gamma, 2.0] + 1e-9
    for delta in (1.0, 2.0, 4.0):
        assert values[2.0, delta] <= values[1.0, delta] + 1e-9
        assert values[4.0, delta] <= values[2.0, delta] + 1e-9
