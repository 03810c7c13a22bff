"""Benchmark environments: a small toy chain plus discrete graph,
mountain-car-style chain, and gridworld re-creations, with behavior and
evaluation policies chosen so the evaluation policy is strictly better
without confounding.  Also the steady-state transform used by the
long-horizon experiments (terminals removed, state-only rewards)."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .mdp import PolicyTable, TabularMDP, policy_value

ENV_NAMES = ("toy", "ope-graph", "ope-mc", "ope-gridworld")


@dataclass(frozen=True)
class BenchmarkEnv:
    name: str
    mdp: TabularMDP
    pi_b: PolicyTable
    pi_e: PolicyTable
    default_horizon: int
    behavior_value: float
    eval_value: float


def _finalize(name, mdp, pi_b, pi_e, horizon) -> BenchmarkEnv:
    _, v_b = policy_value(mdp, pi_b, horizon)
    _, v_e = policy_value(mdp, pi_e, horizon)
    return BenchmarkEnv(
        name=name, mdp=mdp, pi_b=pi_b, pi_e=pi_e,
        default_horizon=horizon, behavior_value=v_b, eval_value=v_e,
    )


def _toy() -> BenchmarkEnv:
    # 3 states, 2 actions, horizon 5.  Action 1 steers toward the rewarding
    # state; both policies mix, the evaluation policy more aggressively.
    X, A = 3, 2
    P = np.zeros((X, A, X))
    for x in range(X):
        P[x, 0] = [0.0, 0.30, 0.70]
        P[x, 1] = [0.0, 0.90, 0.10]
    R = np.zeros((X, A, X))
    R[:, :, 1] = 0.15
    R[:, :, 2] = -0.06
    chi = np.array([1.0, 0.0, 0.0])
    mdp = TabularMDP(X, A, P, R, chi, discount=1.0)
    pi_b = PolicyTable(np.tile([0.3, 0.7], (X, 1)))
    pi_e = PolicyTable(np.tile([0.2, 0.8], (X, 1)))
    return _finalize("toy", mdp, pi_b, pi_e, horizon=5)


def _graph() -> BenchmarkEnv:
    # 4-level binary chain 0 -> {1,2} -> {3,4} -> {5,6} -> 7 (absorbing).
    # Odd states are the "good" branch; action 1 aims there with slippage.
    X, A = 8, 2
    slip = 0.15
    levels = [(0, 0), (1, 2), (3, 4), (5, 6)]
    P = np.zeros((X, A, X))
    R = np.zeros((X, A, X))
    reward = 0.3

    def set_row(x, good, bad):
        P[x, 1, good] = 1.0 - slip
        P[x, 1, bad] = slip
        P[x, 0, good] = slip
        P[x, 0, bad] = 1.0 - slip

    set_row(0, 1, 2)
    for x in (1, 2):
        set_row(x, 3, 4)
    for x in (3, 4):
        set_row(x, 5, 6)
    for good in (1, 3, 5):
        R[:, :, good] = reward
    for bad in (2, 4, 6):
        R[:, :, bad] = -reward
    # last level feeds the terminal; reward depends on where you came from
    for x, r in ((5, reward), (6, -reward)):
        P[x, :, 7] = 1.0
        R[x, :, 7] = r
    P[7, :, 7] = 1.0  # absorbing, zero reward
    chi = np.zeros(X)
    chi[0] = 1.0
    mdp = TabularMDP(X, A, P, R, chi, discount=1.0)
    pi_b = PolicyTable(np.tile([0.60, 0.40], (X, 1)))
    pi_e = PolicyTable(np.tile([0.05, 0.95], (X, 1)))
    return _finalize("ope-graph", mdp, pi_b, pi_e, horizon=4)


def _mc() -> BenchmarkEnv:
    # Discretized mountain-car-style chain: positions 0..20, goal state 21
    # absorbing.  Every step costs -1 until the goal absorbs; reaching it is
    # the only escape (sparse objective).
    X, A = 22, 2
    goal = 21
    start = 7
    P = np.zeros((X, A, X))
    R = np.full((X, A, X), -1.0)
    for x in range(goal):
        fwd = min(x + 1, goal)
        back = max(x - 1, 0)
        P[x, 1, fwd] += 0.90
        P[x, 1, x] += 0.10
        P[x, 0, back] += 0.80
        P[x, 0, x] += 0.20
    P[goal, :, goal] = 1.0
    R[goal, :, :] = 0.0
    chi = np.zeros(X)
    chi[start] = 1.0
    mdp = TabularMDP(X, A, P, R, chi, discount=0.99)
    pi_b = PolicyTable(np.tile([0.06, 0.94], (X, 1)))
    pi_e = PolicyTable(np.tile([0.05, 0.95], (X, 1)))
    return _finalize("ope-mc", mdp, pi_b, pi_e, horizon=20)


def _gridworld() -> BenchmarkEnv:
    # 4x4 grid, actions up/down/left/right with slip, step penalty, goal at
    # the far corner (absorbing).
    side = 4
    X, A = side * side, 4
    goal = X - 1
    slip = 0.1
    step_cost = -0.08
    goal_reward = 0.70
    moves = [(-1, 0), (1, 0), (0, -1), (0, 1)]  # up, down, left, right
    P = np.zeros((X, A, X))
    R = np.zeros((X, A, X))

    def clamp(r, c):
        return min(max(r, 0), side - 1), min(max(c, 0), side - 1)

    for x in range(X):
        if x == goal:
            P[x, :, x] = 1.0
            continue
        r, c = divmod(x, side)
        for a in range(A):
            for a2 in range(A):
                prob = 1.0 - slip if a2 == a else slip / (A - 1)
                rr, cc = clamp(r + moves[a2][0], c + moves[a2][1])
                P[x, a, rr * side + cc] += prob
        R[x, :, :] = step_cost
        R[x, :, goal] = step_cost + goal_reward
    chi = np.zeros(X)
    chi[0] = 1.0
    mdp = TabularMDP(X, A, P, R, chi, discount=1.0)
    # behavior: mild drift toward down/right; evaluation: strong drift
    pi_b = PolicyTable(np.tile([0.10, 0.40, 0.10, 0.40], (X, 1)))
    pi_e = PolicyTable(np.tile([0.05, 0.45, 0.05, 0.45], (X, 1)))
    return _finalize("ope-gridworld", mdp, pi_b, pi_e, horizon=8)


_BUILDERS = {
    "toy": _toy,
    "ope-graph": _graph,
    "ope-mc": _mc,
    "ope-gridworld": _gridworld,
}


def load_env(name: str) -> BenchmarkEnv:
    """Deterministic construction of one of the four benchmark environments."""
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise ParameterError(
            f"unknown environment {name!r}; choose from {sorted(_BUILDERS)}"
        ) from None
    return builder()


def load_env_file(path: str) -> BenchmarkEnv:
    """Load a custom environment from JSON.

    Schema: {"name", "mdp": <TabularMDP schema>, "pi_b": [[...]],
    "pi_e": [[...]], "horizon": int}.  Reference values are recomputed."""
    import json

    with open(path) as fh:
        doc = json.load(fh)
    try:
        mdp = TabularMDP.from_json(json.dumps(doc["mdp"]))
        pi_b = PolicyTable(np.array(doc["pi_b"], dtype=float))
        pi_e = PolicyTable(np.array(doc["pi_e"], dtype=float))
        name = str(doc.get("name", "custom"))
        horizon = int(doc["horizon"])
    except KeyError as exc:
        raise ParameterError(f"environment file missing key {exc}") from None
    return _finalize(name, mdp, pi_b, pi_e, horizon)


def _terminal_states(mdp: TabularMDP) -> np.ndarray:
    """Absorbing states with zero reward on the self-loop, for all actions."""
    X = mdp.n_states
    term = np.zeros(X, dtype=bool)
    for x in range(X):
        absorbing = np.all(mdp.transitions[x, :, x] == 1.0)
        zero_r = np.all(mdp.rewards[x, :, x] == 0.0)
        term[x] = absorbing and zero_r
    return term


def steady_state_transform(env: BenchmarkEnv) -> BenchmarkEnv:
    """Remove terminal states for a nontrivial steady state.

    Inbound probability mass to terminals is redistributed proportionally over
    the surviving destinations (uniformly when a row had no surviving mass),
    rewards become state-only expected rewards under the evaluation policy,
    and the discount is set to 0.95."""
    term = _terminal_states(env.mdp)
    if not term.any():
        warnings.warn(f"environment {env.name} has no terminal states; "
                      "steady-state transform is the identity apart from the discount")
        keep = np.ones(env.mdp.n_states, dtype=bool)
    else:
        keep = ~term
    idx = np.flatnonzero(keep)
    X_new = idx.shape[0]
    A = env.mdp.n_actions
    old_P = env.mdp.transitions
    # state-only rewards from the ORIGINAL model: expected reward from x
    # under the evaluation policy
    r_state = np.einsum(
        "xa,xay,xay->x", env.pi_e.probs, old_P, env.mdp.rewards
    )
    P = np.zeros((X_new, A, X_new))
    for i, x in enumerate(idx):
        for a in range(A):
            row = old_P[x, a][keep]
            total = row.sum()
            if total > 0.0:
                P[i, a] = row / total
            else:
                P[i, a] = 1.0 / X_new
    R = np.zeros((X_new, A, X_new))
    R[:, :, :] = r_state[idx][:, None, None]
    chi = env.mdp.initial_dist[keep]
    chi_total = chi.sum()
    if chi_total <= 0.0:
        chi = np.full(X_new, 1.0 / X_new)
    else:
        chi = chi / chi_total
    mdp = TabularMDP(X_new, A, P, R, chi, discount=0.95)
    pi_b = PolicyTable(env.pi_b.probs[keep])
    pi_e = PolicyTable(env.pi_e.probs[keep])
    out = _finalize(env.name + "-steady", mdp, pi_b, pi_e, env.default_horizon)
    return out
