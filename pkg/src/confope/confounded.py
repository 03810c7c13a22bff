"""Full-information MDP with a binary iid unobserved state.

Houses marginalization (both the policy-free and the dataset-apparent
marginal transitions), the reweighting identity used as a test oracle,
synthetic confounding injection, and the audit that recovers the smallest
odds-ratio parameters a given model satisfies.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParameterError, ValidationError
from .mdp import PROB_ATOL, PolicyTable, TabularMDP, bellman_apply, mix_q_into_v, zero_values

N_U = 2  # binary unobserved state; worst-case bounds lose nothing with more


@dataclass(frozen=True)
class ConfoundedMDP:
    """(X x U, A) MDP where u is redrawn iid each step with P(u=1) = p_u.

    transitions_u[x, u, a, x'] = P(x'|x,u,a); behavior_u[x, u, a] = pi_b(a|x,u).
    Rewards depend on (x, a, x') only; the initial distribution is over X.
    """

    n_states: int
    n_actions: int
    transitions_u: np.ndarray  # [X, 2, A, X]
    behavior_u: np.ndarray     # [X, 2, A]
    p_u: float
    rewards: np.ndarray        # [X, A, X]
    initial_dist: np.ndarray   # [X]
    discount: float

    def __post_init__(self):
        t = np.asarray(self.transitions_u, dtype=float)
        pi = np.asarray(self.behavior_u, dtype=float)
        r = np.asarray(self.rewards, dtype=float)
        chi = np.asarray(self.initial_dist, dtype=float)
        X, A = self.n_states, self.n_actions
        if t.shape != (X, N_U, A, X):
            raise DimensionError(f"transitions_u shape {t.shape} != {(X, N_U, A, X)}")
        if pi.shape != (X, N_U, A):
            raise DimensionError(f"behavior_u shape {pi.shape} != {(X, N_U, A)}")
        if r.shape != (X, A, X):
            raise DimensionError("rewards shape mismatch")
        if chi.shape != (X,):
            raise DimensionError("initial_dist shape mismatch")
        if np.any(t < -PROB_ATOL) or np.any(np.abs(t.sum(axis=-1) - 1.0) > PROB_ATOL):
            raise ValidationError("transitions_u rows must be distributions")
        if np.any(pi < -PROB_ATOL) or np.any(np.abs(pi.sum(axis=-1) - 1.0) > PROB_ATOL):
            raise ValidationError("behavior_u rows must be distributions")
        if not 0.0 <= self.p_u <= 1.0:
            raise ValidationError("p_u must lie in [0, 1]")
        if abs(chi.sum() - 1.0) > PROB_ATOL or np.any(chi < -PROB_ATOL):
            raise ValidationError("initial_dist must be a distribution")
        if not np.all(np.isfinite(r)):
            raise ValidationError("rewards must be finite")
        if not 0.0 <= self.discount <= 1.0:
            raise ValidationError("discount must lie in [0, 1]")
        for name, val in (
            ("transitions_u", t), ("behavior_u", pi), ("rewards", r), ("initial_dist", chi)
        ):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def u_weights(self) -> np.ndarray:
        """p(u) as a length-2 vector, index = u."""
        return np.array([1.0 - self.p_u, self.p_u])

    def to_json(self) -> str:
        doc = {
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "gamma": self.discount,
            "p_u": self.p_u,
            "initial_dist": self.initial_dist.tolist(),
            "transitions_u": self.transitions_u.tolist(),
            "behavior_u": self.behavior_u.tolist(),
            "rewards": self.rewards.tolist(),
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "ConfoundedMDP":
        doc = json.loads(text)
        return cls(
            n_states=int(doc["n_states"]),
            n_actions=int(doc["n_actions"]),
            transitions_u=np.array(doc["transitions_u"], dtype=float),
            behavior_u=np.array(doc["behavior_u"], dtype=float),
            p_u=float(doc["p_u"]),
            rewards=np.array(doc["rewards"], dtype=float),
            initial_dist=np.array(doc["initial_dist"], dtype=float),
            discount=float(doc["gamma"]),
        )


@dataclass(frozen=True)
class MarginalModel:
    """Output of marginalize(): the marginal MDP and both marginal transitions.

    true_marginal[x,a,:]     = sum_u p(u) P(x'|x,u,a)   (policy-free)
    apparent_marginal[x,a,:] = sum_u p(u|x,a) P(x'|x,u,a), the transition
    frequencies a naive estimator recovers from logged data.  Pairs with
    pi_b(a|x) = 0 have an undefined apparent row, flagged in undefined_mask.
    """

    mdp: TabularMDP
    behavior: PolicyTable
    true_marginal: np.ndarray
    apparent_marginal: np.ndarray
    undefined_mask: np.ndarray  # bool [X, A]; True where apparent row undefined


def marginalize(cm: ConfoundedMDP) -> MarginalModel:
    """Integrate out u, returning the marginal MDP, behavior policy, and both
    the policy-free and dataset-apparent marginal transition tensors."""
    w = cm.u_weights
    pi_marg = np.einsum("u,xua->xa", w, cm.behavior_u)
    true_marg = np.einsum("u,xuay->xay", w, cm.transitions_u)
    # p(u|x,a) = pi_b(a|x,u) p(u) / pi_b(a|x)  (Bayes rule, u iid so p(u|x)=p(u))
    joint = cm.behavior_u * w[None, :, None]          # [X, 2, A]
    undefined = pi_marg <= 0.0
    denom = np.where(undefined, 1.0, pi_marg)
    p_u_given_xa = joint / denom[:, None, :]
    apparent = np.einsum("xua,xuay->xay", p_u_given_xa, cm.transitions_u)
    apparent = np.where(undefined[:, :, None], np.nan, apparent)
    # re-normalize away accumulated fp error so TabularMDP validation passes
    true_marg = true_marg / true_marg.sum(axis=-1, keepdims=True)
    pi_marg = pi_marg / pi_marg.sum(axis=-1, keepdims=True)
    mdp = TabularMDP(
        n_states=cm.n_states,
        n_actions=cm.n_actions,
        transitions=true_marg,
        rewards=cm.rewards,
        initial_dist=cm.initial_dist,
        discount=cm.discount,
    )
    return MarginalModel(
        mdp=mdp,
        behavior=PolicyTable(pi_marg),
        true_marginal=true_marg,
        apparent_marginal=apparent,
        undefined_mask=undefined,
    )


def unconfounded_lift(
    mdp: TabularMDP, behavior: PolicyTable, p: float = 0.5
) -> ConfoundedMDP:
    """Embed an ordinary MDP as a confounded model whose unobserved state is
    ignored by both the dynamics and the behavior policy; marginals of every
    kind then coincide with the original model."""
    transitions_u = np.repeat(mdp.transitions[:, None, :, :], N_U, axis=1)
    behavior_u = np.repeat(behavior.probs[:, None, :], N_U, axis=1)
    return ConfoundedMDP(
        n_states=mdp.n_states,
        n_actions=mdp.n_actions,
        transitions_u=transitions_u,
        behavior_u=behavior_u,
        p_u=p,
        rewards=mdp.rewards,
        initial_dist=mdp.initial_dist,
        discount=mdp.discount,
    )


def full_information_value(cm: ConfoundedMDP, pi_e: PolicyTable, horizon: int) -> float:
    """Exact V^{pi_e}_T in the full-information model.

    Since u is iid and pi_e ignores it, this equals the value in the marginal
    MDP built from the policy-free marginal transitions.
    """
    marg = marginalize(cm)
    v = zero_values(cm.n_states)
    for _ in range(horizon):
        q = bellman_apply(marg.mdp, pi_e, v)
        v = mix_q_into_v(q, pi_e)
    return float(cm.initial_dist @ v.values)


def reweighted_conditional_mean(cm: ConfoundedMDP, f, x: int, a: int) -> float:
    """E_D[(pi_b(a|x)/pi_b(a|x,u)) f(x,a,x') | x,a].

    The reweighting undoes the Bayes-rule tilt of the logged data, so the
    result equals the policy-free marginal mean sum_u p(u) sum_x' P f.
    """
    w = cm.u_weights
    pi_xu = cm.behavior_u[x, :, a]
    pi_marg = float(w @ pi_xu)
    total = 0.0
    for u in range(N_U):
        p_u_xa = pi_xu[u] * w[u] / pi_marg
        if p_u_xa > 0.0 and pi_xu[u] <= 0.0:
            raise ParameterError(
                f"behavior probability is zero at (x={x}, a={a}, u={u}) "
                "but the pair has positive posterior weight"
            )
        if p_u_xa == 0.0:
            continue
        ratio = pi_marg / pi_xu[u]
        for x_next in range(cm.n_states):
            pr = cm.transitions_u[x, u, a, x_next]
            if pr > 0.0:
                total += p_u_xa * pr * ratio * f(x, a, x_next)
    return total


def audit_sensitivity(cm: ConfoundedMDP) -> tuple[float, float]:
    """Smallest (gamma, delta) odds-ratio parameters the model satisfies.

    Policy odds are measured against the marginal behavior policy; transition
    odds against the dataset-apparent marginal.  Entries whose marginal is 0
    or 1 are odds fixed points and are skipped.
    """
    marg = marginalize(cm)
    gamma = _max_odds_ratio(cm.behavior_u, marg.behavior.probs[:, None, :])
    apparent = np.where(np.isnan(marg.apparent_marginal), 0.0, marg.apparent_marginal)
    delta = _max_odds_ratio(
        cm.transitions_u,
        apparent[:, None, :, :],
        skip=np.broadcast_to(
            marg.undefined_mask[:, None, :, None], cm.transitions_u.shape
        ),
    )
    return gamma, delta


def _max_odds_ratio(q: np.ndarray, q_ref: np.ndarray, skip=None) -> float:
    q_ref = np.broadcast_to(q_ref, q.shape)
    eps = 1e-13
    mask = (q_ref <= eps) | (q_ref >= 1.0 - eps)
    if skip is not None:
        mask = mask | skip
    qc = np.clip(q, eps, 1.0 - eps)
    qr = np.clip(q_ref, eps, 1.0 - eps)
    ratio = (qc / (1.0 - qc)) / (qr / (1.0 - qr))
    ratio = np.maximum(ratio, 1.0 / ratio)
    ratio = np.where(mask, 1.0, ratio)
    return float(ratio.max(initial=1.0))


@dataclass(frozen=True)
class InjectionResult:
    """A synthetic confounded model plus the tilt strengths actually achieved
    (reduced below the request when the requested tilt was infeasible)."""

    model: ConfoundedMDP
    achieved_gamma: float
    achieved_delta: float


def _odds_tilt_row(row: np.ndarray, idx: int, scale: float) -> np.ndarray:
    """Multiply the odds of entry `idx` by `scale` and renormalize the rest
    proportionally.  Degenerate rows (entry at 0 or 1) are returned as-is."""
    q = row[idx]
    if q <= 0.0 or q >= 1.0:
        return row.copy()
    q_new = scale * q / (scale * q + (1.0 - q))
    out = row * (1.0 - q_new) / (1.0 - q)
    out[idx] = q_new
    return out


def _mix_complement(marginal: np.ndarray, tilted: np.ndarray, p: float) -> np.ndarray | None:
    """Solve (1-p)*other + p*tilted = marginal for the u=0 component.

    Returns None when the complement leaves [0,1]."""
    other = (marginal - p * tilted) / (1.0 - p)
    if np.any(other < -1e-12) or np.any(other > 1.0 + 1e-12):
        return None
    return np.clip(other, 0.0, 1.0)


def _optimal_state_values(mdp: TabularMDP, policy_free_horizon: int) -> np.ndarray:
    """Finite-horizon optimal value function by value iteration."""
    v = np.zeros(mdp.n_states)
    for _ in range(policy_free_horizon):
        q = np.einsum(
            "xay,xay->xa", mdp.transitions, mdp.rewards + mdp.discount * v[None, None, :]
        )
        v = q.max(axis=1)
    return v


def inject_confounding(
    mdp: TabularMDP,
    behavior: PolicyTable,
    gamma_star: float,
    delta_star: float,
    p: float,
    tilt_signal: str = "reward",
    horizon: int = 50,
) -> InjectionResult:
    """Add a binary iid confounder correlating actions and transitions.

    The marginal behavior policy and policy-free marginal transitions are
    preserved exactly; tilt strengths are bisected so the audited odds-ratio
    parameters match gamma_star / delta_star (or the largest feasible values).
    Under u=1 the odds of the high-signal action / next state are tilted up;
    the u=0 component is solved from the marginal-preservation identity.
    """
    if gamma_star < 1.0 or delta_star < 1.0:
        raise ParameterError("gamma_star and delta_star must be >= 1")
    if not 0.0 < p < 1.0:
        raise ParameterError("p must lie strictly inside (0, 1)")
    if tilt_signal not in ("reward", "optimal_value"):
        raise ParameterError(f"unknown tilt_signal {tilt_signal!r}")

    X, A = mdp.n_states, mdp.n_actions
    if tilt_signal == "reward":
        next_signal = None
        action_signal = np.einsum("xay,xay->xa", mdp.transitions, mdp.rewards)
    else:
        v_opt = _optimal_state_values(mdp, horizon)
        next_signal = v_opt
        action_signal = np.einsum(
            "xay,xay->xa", mdp.transitions, mdp.rewards + mdp.discount * v_opt[None, None, :]
        )
    # favored action per state; ties broken by lowest index via argmax
    fav_action = action_signal.argmax(axis=1)

    def build_behavior(scale: float) -> np.ndarray | None:
        beh = np.empty((X, N_U, A))
        for x in range(X):
            row = behavior.probs[x]
            tilted = _odds_tilt_row(row, int(fav_action[x]), scale)
            other = _mix_complement(row, tilted, p)
            if other is None:
                return None
            beh[x, 1] = tilted / tilted.sum()
            beh[x, 0] = other / other.sum()
        return beh

    def build_transitions(scale: float) -> np.ndarray | None:
        tr = np.empty((X, N_U, A, X))
        for x in range(X):
            for a in range(A):
                row = mdp.transitions[x, a]
                if next_signal is None:
                    sig = mdp.rewards[x, a]
                else:
                    sig = next_signal
                support = row > 0.0
                if support.sum() <= 1:
                    tr[x, 1, a] = row
                    tr[x, 0, a] = row
                    continue
                masked = np.where(support, sig, -np.inf)
                fav = int(masked.argmax())  # ties: lowest state index
                tilted = _odds_tilt_row(row, fav, scale)
                other = _mix_complement(row, tilted, p)
                if other is None:
                    return None
                # keep rows exactly stochastic
                tr[x, 1, a] = tilted / tilted.sum()
                tr[x, 0, a] = other / other.sum()
        return tr

    def audit_gamma_of(scale: float) -> float | None:
        beh = build_behavior(scale)
        if beh is None:
            return None
        return _max_odds_ratio(beh, behavior.probs[:, None, :])

    s_beh, achieved_gamma = _bisect_scale(audit_gamma_of, gamma_star)
    behavior_u = build_behavior(s_beh)

    def audit_delta_of(scale: float) -> float | None:
        tr = build_transitions(scale)
        if tr is None:
            return None
        cm = ConfoundedMDP(
            n_states=X, n_actions=A, transitions_u=tr, behavior_u=behavior_u,
            p_u=p, rewards=mdp.rewards, initial_dist=mdp.initial_dist,
            discount=mdp.discount,
        )
        return audit_sensitivity(cm)[1]

    s_tr, achieved_delta = _bisect_scale(audit_delta_of, delta_star)
    transitions_u = build_transitions(s_tr)
    model = ConfoundedMDP(
        n_states=X, n_actions=A, transitions_u=transitions_u, behavior_u=behavior_u,
        p_u=p, rewards=mdp.rewards, initial_dist=mdp.initial_dist,
        discount=mdp.discount,
    )
    return InjectionResult(model, achieved_gamma, achieved_delta)


def _bisect_scale(audit_of, target: float, tol: float = 1e-11) -> tuple[float, float]:
    """Find the odds-tilt scale whose audited parameter equals `target`.

    audit_of(scale) returns the audited odds-ratio parameter, or None when
    the tilt is infeasible (complement leaves [0,1]).  The audited value is
    nondecreasing in the scale.  Returns (scale, achieved parameter)."""
    if target <= 1.0:
        return 1.0, 1.0
    # exponential search for a bracket: grow until infeasible or above target
    lo, lo_val = 1.0, 1.0
    hi = target
    bracketed = False
    for _ in range(60):
        v = audit_of(hi)
        if v is None or v >= target:
            bracketed = True
            break
        if v <= lo_val + tol and hi > target:
            break  # tilt no longer moves the audit; give up growing
        lo, lo_val = hi, v
        hi = 1.0 + 2.0 * (hi - 1.0)
    if not bracketed:
        return lo, float(lo_val)
    # bisect audit_of(scale) == target on [lo, hi]; infeasible counts as high
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        v = audit_of(mid)
        if v is None or v > target:
            hi = mid
        else:
            lo, lo_val = mid, v
    return lo, float(lo_val)
