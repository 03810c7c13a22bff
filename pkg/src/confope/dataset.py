"""Trajectory simulation and empirical-model estimation.

Simulation draws the unobserved state fresh each step and never stores it
(a debug flag can emit it to a side channel for test oracles).  Estimation
produces the naive plug-in quantities (pi_hat, P_hat, counts) over visited
state-action pairs; a population mode replaces them with exact expectations.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .confounded import ConfoundedMDP, marginalize
from .errors import ValidationError


@dataclass(frozen=True)
class Trajectory:
    """One logged episode: a list of (x, a, x_next, r) steps."""

    steps: list[tuple[int, int, int, float]]

    def __len__(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class EmpiricalModel:
    """Naive estimates (pi_hat, p_hat) with visit counts and a support mask.

    In population mode counts are absent and pi_hat / p_hat equal the exact
    marginal behavior policy and dataset-apparent marginal transitions.
    Unvisited (x, a) pairs are masked out, never imputed.
    """

    n_states: int
    n_actions: int
    pi_hat: np.ndarray            # [X, A]; zero rows where state unvisited
    p_hat: np.ndarray             # [X, A, X]; zero rows where pair unsupported
    support: np.ndarray           # bool [X, A]
    mode: str                     # "sampled" | "population"
    counts: np.ndarray | None = None   # [X, A] integer, sampled mode only

    def __post_init__(self):
        if self.mode not in ("sampled", "population"):
            raise ValidationError(f"unknown mode {self.mode!r}")
        rows = self.p_hat[self.support]
        if rows.size and np.any(np.abs(rows.sum(axis=-1) - 1.0) > 1e-9):
            raise ValidationError("supported p_hat rows must sum to 1")


def simulate(
    cm: ConfoundedMDP,
    n_trajectories: int,
    horizon: int,
    seed: int,
    collect_u: bool = False,
):
    """Sample trajectories from the confounded model.

    One PCG64 substream per trajectory (spawned from a single SeedSequence),
    so output is bit-reproducible and independent of any parallel schedule.
    Returns the trajectory list, or (trajectories, u_records) if collect_u.
    """
    if n_trajectories < 1 or horizon < 1:
        raise ValidationError("need n_trajectories >= 1 and horizon >= 1")
    children = np.random.SeedSequence(seed).spawn(n_trajectories)
    trajectories = []
    u_records = []
    n_states = cm.n_states
    for child in children:
        rng = np.random.Generator(np.random.PCG64(child))
        x = int(rng.choice(n_states, p=cm.initial_dist))
        steps = []
        us = []
        for _ in range(horizon):
            u = int(rng.random() < cm.p_u)
            a = int(rng.choice(cm.n_actions, p=cm.behavior_u[x, u]))
            x_next = int(rng.choice(n_states, p=cm.transitions_u[x, u, a]))
            r = float(cm.rewards[x, a, x_next])
            steps.append((x, a, x_next, r))
            us.append(u)
            x = x_next
        trajectories.append(Trajectory(steps))
        u_records.append(us)
    if collect_u:
        return trajectories, u_records
    return trajectories


def estimate(data: list[Trajectory], n_states: int, n_actions: int) -> EmpiricalModel:
    """Plug-in estimates over visited pairs: pi_hat = N(x,a)/N(x),
    p_hat = N(x,a,x')/N(x,a)."""
    if not data:
        raise ValidationError("estimate requires a nonempty dataset")
    counts_xa = np.zeros((n_states, n_actions), dtype=np.int64)
    counts_xay = np.zeros((n_states, n_actions, n_states), dtype=np.int64)
    for traj in data:
        for x, a, x_next, _ in traj.steps:
            counts_xa[x, a] += 1
            counts_xay[x, a, x_next] += 1
    counts_x = counts_xa.sum(axis=1)
    support = counts_xa > 0
    pi_hat = np.zeros((n_states, n_actions))
    visited_states = counts_x > 0
    pi_hat[visited_states] = (
        counts_xa[visited_states] / counts_x[visited_states, None]
    )
    p_hat = np.zeros((n_states, n_actions, n_states))
    p_hat[support] = counts_xay[support] / counts_xa[support, None]
    return EmpiricalModel(
        n_states=n_states,
        n_actions=n_actions,
        pi_hat=pi_hat,
        p_hat=p_hat,
        support=support,
        mode="sampled",
        counts=counts_xa,
    )


def population_model(cm: ConfoundedMDP) -> EmpiricalModel:
    """Infinite-data limit: pi_hat is the marginal behavior policy, p_hat the
    dataset-apparent marginal transitions; support is pi_b(a|x) > 0."""
    marg = marginalize(cm)
    support = ~marg.undefined_mask
    p_hat = np.where(np.isnan(marg.apparent_marginal), 0.0, marg.apparent_marginal)
    return EmpiricalModel(
        n_states=cm.n_states,
        n_actions=cm.n_actions,
        pi_hat=marg.behavior.probs.copy(),
        p_hat=p_hat,
        support=support,
        mode="population",
    )


DATASET_HEADER = ["traj_id", "t", "x", "a", "x_next", "r"]


def dataset_to_csv(data: list[Trajectory]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(DATASET_HEADER)
    for i, traj in enumerate(data):
        for t, (x, a, x_next, r) in enumerate(traj.steps):
            writer.writerow([i, t, x, a, x_next, repr(r)])
    return buf.getvalue()


def dataset_from_csv(text: str) -> list[Trajectory]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != DATASET_HEADER:
        raise ValidationError(f"unexpected dataset header {header}")
    by_traj: dict[int, list] = {}
    for row in reader:
        traj_id, t, x, a, x_next, r = row
        by_traj.setdefault(int(traj_id), []).append(
            (int(t), int(x), int(a), int(x_next), float(r))
        )
    out = []
    for traj_id in sorted(by_traj):
        steps = [(x, a, x_next, r) for _, x, a, x_next, r in sorted(by_traj[traj_id])]
        out.append(Trajectory(steps))
    return out
