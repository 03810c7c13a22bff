"""Odds-ratio sensitivity model: ratio bounds and per-entry probability boxes.

Two equivalent views of the same constraint are exposed: the (alpha, beta)
ratio bounds used by the FQE linear program, and entrywise probability
intervals used by the robust solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class SensitivityParams:
    """Confounding strength: gamma on the policy, delta on transitions, p = P(u=1)."""

    gamma: float
    delta: float = 1.0
    p: float = 0.5

    def __post_init__(self):
        if self.gamma < 1.0:
            raise ParameterError(f"gamma must be >= 1, got {self.gamma}")
        if self.delta < 1.0:
            raise ParameterError(f"delta must be >= 1, got {self.delta}")
        if not 0.0 <= self.p <= 1.0:
            raise ParameterError(f"p must lie in [0, 1], got {self.p}")


@dataclass(frozen=True)
class IntervalBox:
    """Entrywise feasible interval [lo, hi] for a probability vector/tensor."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.shape != hi.shape:
            raise ParameterError("lo/hi shapes differ")
        if np.any(lo > hi + 1e-12):
            raise ParameterError("box has lo > hi")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def contains(self, x: np.ndarray, atol: float = 1e-9) -> bool:
        return bool(np.all(x >= self.lo - atol) and np.all(x <= self.hi + atol))


def alpha_beta(pi_hat, gamma: float):
    """Ratio bounds alpha <= pi_b(a|x)/pi_b(a|x,u) <= beta.

    alpha = pi_hat + (1 - pi_hat)/gamma, beta = pi_hat + gamma*(1 - pi_hat).
    Accepts scalars or arrays.
    """
    if gamma < 1.0:
        raise ParameterError(f"gamma must be >= 1, got {gamma}")
    pi_hat = np.asarray(pi_hat, dtype=float)
    alpha = pi_hat + (1.0 - pi_hat) / gamma
    beta = pi_hat + gamma * (1.0 - pi_hat)
    if alpha.ndim == 0:
        return float(alpha), float(beta)
    return alpha, beta


def odds_interval(q_hat, rho: float):
    """Invert an odds-ratio bound of strength rho into a probability interval.

    lo = q/(q + rho(1-q)), hi = rho*q/(rho*q + 1-q).  Entries at 0 or 1 are
    odds fixed points and collapse to the degenerate interval {q}.
    """
    if rho < 1.0:
        raise ParameterError(f"odds-ratio parameter must be >= 1, got {rho}")
    q = np.asarray(q_hat, dtype=float)
    lo = q / (q + rho * (1.0 - q))
    hi = rho * q / (rho * q + (1.0 - q))
    if lo.ndim == 0:
        return float(lo), float(hi)
    return lo, hi


def policy_box(pi_hat_row: np.ndarray, gamma: float) -> IntervalBox:
    """Feasible box for pi_b(.|x,u) given the observed row pi_hat(.|x)."""
    lo, hi = odds_interval(np.asarray(pi_hat_row, dtype=float), gamma)
    return IntervalBox(lo, hi)


def transition_box(p_hat_row: np.ndarray, delta: float) -> IntervalBox:
    """Feasible box for P(.|x,u,a) given the observed row P_hat(.|x,a)."""
    lo, hi = odds_interval(np.asarray(p_hat_row, dtype=float), delta)
    return IntervalBox(lo, hi)
