"""Tabular MDP representation and exact finite-horizon policy evaluation."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ValidationError

#: Absolute tolerance for probability-row validation at construction time.
PROB_ATOL = 1e-12


def _check_rows_sum_to_one(arr: np.ndarray, what: str) -> None:
    if np.any(arr < -PROB_ATOL):
        raise ValidationError(f"{what} has negative entries")
    sums = arr.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > PROB_ATOL):
        bad = np.abs(sums - 1.0).max()
        raise ValidationError(f"{what} rows must sum to 1 (max deviation {bad:.3e})")


def _check_distribution(vec: np.ndarray, what: str) -> None:
    if np.any(vec < -PROB_ATOL):
        raise ValidationError(f"{what} has negative entries")
    if abs(vec.sum() - 1.0) > PROB_ATOL:
        raise ValidationError(f"{what} must sum to 1 within {PROB_ATOL}")


@dataclass(frozen=True)
class TabularMDP:
    """Finite MDP with transitions P(x'|x,a), rewards R(x,a,x') and start dist.

    Immutable after construction; all validation happens here, never silently
    renormalized later.
    """

    n_states: int
    n_actions: int
    transitions: np.ndarray  # [X, A, X]
    rewards: np.ndarray      # [X, A, X]
    initial_dist: np.ndarray  # [X]
    discount: float

    def __post_init__(self):
        t = np.asarray(self.transitions, dtype=float)
        r = np.asarray(self.rewards, dtype=float)
        chi = np.asarray(self.initial_dist, dtype=float)
        if self.n_states <= 0 or self.n_actions <= 0:
            raise ValidationError("n_states and n_actions must be positive")
        shape = (self.n_states, self.n_actions, self.n_states)
        if t.shape != shape:
            raise DimensionError(f"transitions shape {t.shape} != {shape}")
        if r.shape != shape:
            raise DimensionError(f"rewards shape {r.shape} != {shape}")
        if chi.shape != (self.n_states,):
            raise DimensionError(f"initial_dist shape {chi.shape} != ({self.n_states},)")
        sums = t.sum(axis=-1)
        if np.any(t < -PROB_ATOL) or np.any(np.abs(sums - 1.0) > PROB_ATOL):
            raise ValidationError("each transitions[x,a,:] row must be a distribution")
        _check_distribution(chi, "initial_dist")
        if not np.all(np.isfinite(r)):
            raise ValidationError("rewards must be finite")
        if not 0.0 <= self.discount <= 1.0:
            raise ValidationError("discount must lie in [0, 1]")
        for name, val in (("transitions", t), ("rewards", r), ("initial_dist", chi)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    def to_json(self) -> str:
        doc = {
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "gamma": self.discount,
            "initial_dist": self.initial_dist.tolist(),
            "transitions": self.transitions.tolist(),
            "rewards": self.rewards.tolist(),
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "TabularMDP":
        doc = json.loads(text)
        return cls(
            n_states=int(doc["n_states"]),
            n_actions=int(doc["n_actions"]),
            transitions=np.array(doc["transitions"], dtype=float),
            rewards=np.array(doc["rewards"], dtype=float),
            initial_dist=np.array(doc["initial_dist"], dtype=float),
            discount=float(doc["gamma"]),
        )


@dataclass(frozen=True)
class PolicyTable:
    """Stationary policy as a row-stochastic matrix probs[x, a] = pi(a|x)."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 2:
            raise DimensionError("policy probs must be a 2-d matrix")
        if np.any(p < -PROB_ATOL) or np.any(p > 1.0 + PROB_ATOL):
            raise ValidationError("policy entries must lie in [0, 1]")
        if np.any(np.abs(p.sum(axis=1) - 1.0) > PROB_ATOL):
            raise ValidationError("each policy row must sum to 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def n_states(self) -> int:
        return self.probs.shape[0]

    @property
    def n_actions(self) -> int:
        return self.probs.shape[1]


@dataclass(frozen=True)
class ValueTable:
    """State values (1-d) or state-action values (2-d) at a given horizon."""

    values: np.ndarray
    horizon: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim not in (1, 2):
            raise DimensionError("value table must be 1-d (V) or 2-d (Q)")
        if not np.all(np.isfinite(v)):
            raise ValidationError("value entries must be finite")
        if self.horizon < 0:
            raise ValidationError("horizon must be nonnegative")
        if self.horizon == 0 and np.any(v != 0.0):
            raise ValidationError("horizon-0 values must be identically zero")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def is_state_value(self) -> bool:
        return self.values.ndim == 1


def zero_values(n_states: int) -> ValueTable:
    return ValueTable(np.zeros(n_states), horizon=0)


def bellman_apply(mdp: TabularMDP, policy: PolicyTable, v_prev: ValueTable) -> ValueTable:
    """One application of the policy-evaluation Bellman operator.

    Q(x,a) = sum_x' P(x'|x,a) (R(x,a,x') + gamma * v_prev(x')).
    """
    if not v_prev.is_state_value:
        raise DimensionError("v_prev must be a state-value table")
    if v_prev.values.shape[0] != mdp.n_states:
        raise DimensionError(
            f"v_prev has {v_prev.values.shape[0]} states, mdp has {mdp.n_states}"
        )
    if policy.probs.shape != (mdp.n_states, mdp.n_actions):
        raise DimensionError("policy shape does not match mdp")
    target = mdp.rewards + mdp.discount * v_prev.values[None, None, :]
    q = np.einsum("xay,xay->xa", mdp.transitions, target)
    return ValueTable(q, horizon=v_prev.horizon + 1)


def mix_q_into_v(q: ValueTable, policy: PolicyTable) -> ValueTable:
    """V(x) = Q(x, pi) = sum_a pi(a|x) Q(x,a)."""
    if q.is_state_value:
        raise DimensionError("expected a state-action value table")
    v = np.einsum("xa,xa->x", policy.probs, q.values)
    return ValueTable(v, horizon=q.horizon)


def policy_value(
    mdp: TabularMDP, policy: PolicyTable, horizon: int
) -> tuple[ValueTable, float]:
    """Exact finite-horizon value of `policy`: (V_T, chi . V_T)."""
    if horizon < 0:
        raise ValidationError("horizon must be nonnegative")
    v = zero_values(mdp.n_states)
    for _ in range(horizon):
        q = bellman_apply(mdp, policy, v)
        v = mix_q_into_v(q, policy)
    expected = float(mdp.initial_dist @ v.values)
    return v, expected
