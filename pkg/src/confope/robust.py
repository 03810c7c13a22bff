"""S-rectangular robust-MDP lower bound under the odds-ratio sensitivity model.

Per state, the worst case couples the hidden behavior policy pi_b(.|x,u) and
hidden transitions P(.|x,u,a) through the data-matching equalities.  With a
binary u, the u=1 variables are affine in the u=0 variables given those
equalities, so for a fixed u=0 policy row the problem splits into one
box-plus-simplex LP per action (a waterfill).  The remaining outer problem is
separable: the objective is a sum of per-action terms h_a(q_a) coupled only by
sum_a q_a = 1, which we solve by dense 1-d search (two actions) or a min-plus
dynamic program over a budget grid (three or more), followed by a
pattern-search polish.  The outer problem is nonconvex, so the returned value
is certified downstream by the candidate-model tightness check and, at desk
scale, a grid brute-force oracle in the test suite.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .confounded import ConfoundedMDP
from .dataset import EmpiricalModel
from .errors import InfeasibleError, ValidationError
from .fqe import _fallback_floor
from .mdp import PolicyTable, ValueTable
from .sensitivity import SensitivityParams, odds_interval

_GRID_1D = 1025        # dense grid for the two-action outer problem
_DP_STEPS = 512        # budget resolution for the min-plus DP
_POLISH_TOL = 1e-12


@dataclass(frozen=True)
class StateUncertaintyProblem:
    """All inputs for the one-state worst-case minimization."""

    pi_hat: np.ndarray        # [A] observed behavior row
    p_hat: np.ndarray         # [A, X] observed transition rows
    support: np.ndarray       # bool [A]
    pi_e: np.ndarray          # [A] evaluation policy row
    y: np.ndarray             # [A, X] continuation targets R(x,a,.) + gamma*V
    params: SensitivityParams
    fallback_value: float     # pessimistic per-step value for unsupported pairs


@dataclass
class StateMinimizer:
    """The per-state worst-case model: u=0/u=1 behavior rows and transitions."""

    q0: np.ndarray   # [A]
    q1: np.ndarray   # [A]
    P0: np.ndarray   # [A, X]
    P1: np.ndarray   # [A, X]


@dataclass
class CandidateModel:
    """Full-information model assembled from per-state minimizers."""

    behavior_u: np.ndarray     # [X, 2, A]
    transitions_u: np.ndarray  # [X, 2, A, X]
    p: float

    def to_confounded(self, rewards, initial_dist, discount) -> ConfoundedMDP:
        X, A = self.behavior_u.shape[0], self.behavior_u.shape[2]
        return ConfoundedMDP(
            n_states=X, n_actions=A,
            transitions_u=self.transitions_u, behavior_u=self.behavior_u,
            p_u=self.p, rewards=np.asarray(rewards, dtype=float),
            initial_dist=np.asarray(initial_dist, dtype=float), discount=discount,
        )

    def validate(self, model: EmpiricalModel, params: SensitivityParams, atol=1e-8):
        """Check the data-matching equalities and odds-ratio boxes against the
        observed (pi_hat, p_hat).  Unsupported pairs are skipped (no data pins
        them).  Raises ValidationError listing violations."""
        problems = []
        w = np.array([1.0 - self.p, self.p])
        pi_mix = np.einsum("u,xua->xa", w, self.behavior_u)
        joint_mix = np.einsum(
            "u,xua,xuay->xay", w, self.behavior_u, self.transitions_u
        )
        sup = model.support
        if np.abs(pi_mix - model.pi_hat)[sup].max(initial=0.0) > atol:
            problems.append("behavior mixture does not reproduce pi_hat")
        target = model.pi_hat[:, :, None] * model.p_hat
        if np.abs(joint_mix - target)[sup].max(initial=0.0) > atol:
            problems.append("joint mixture does not reproduce pi_hat * p_hat")
        g_lo, g_hi = odds_interval(model.pi_hat, params.gamma)
        for u in range(2):
            b = self.behavior_u[:, u, :]
            if np.any((b < g_lo - atol)[sup]) or np.any((b > g_hi + atol)[sup]):
                problems.append(f"behavior_u[u={u}] leaves its policy box")
        t_lo, t_hi = odds_interval(model.p_hat, params.delta)
        for u in range(2):
            t = self.transitions_u[:, u, :, :]
            if (
                np.any((t < t_lo - atol)[sup])
                or np.any((t > t_hi + atol)[sup])
            ):
                problems.append(f"transitions_u[u={u}] leaves its transition box")
        if problems:
            raise ValidationError("; ".join(problems))


def _waterfill_sorted(y_s, lo_s, hi_s):
    """Waterfill on pre-sorted coordinates (batched over leading dims).

    Minimizes sum y_s * v over {sum v = 1, lo_s <= v <= hi_s}.  Returns
    values; infeasible rows get +inf."""
    caps = np.maximum(hi_s - lo_s, 0.0)
    remaining = 1.0 - lo_s.sum(axis=-1)
    cum_prev = np.cumsum(caps, axis=-1) - caps
    fill = np.clip(remaining[..., None] - cum_prev, 0.0, caps)
    v_s = lo_s + fill
    values = (v_s * y_s).sum(axis=-1)
    bad = (remaining < -1e-9) | (remaining > caps.sum(axis=-1) + 1e-9)
    return np.where(bad, np.inf, values), v_s


class _StateSolver:
    """Evaluates and minimizes the separable outer objective for one state."""

    def __init__(self, prob: StateUncertaintyProblem):
        self.prob = prob
        params = prob.params
        self.p = params.p
        A = prob.pi_hat.shape[0]
        self.A = A
        self.sup = prob.support & (prob.pi_hat > 0.0)
        g_lo, g_hi = odds_interval(prob.pi_hat, params.gamma)
        p, pi = self.p, prob.pi_hat
        # feasible interval for q0 = pi_b(a|x, u=0): its own box intersected
        # with the box induced on q1 = (pi - (1-p) q0) / p
        lo = np.maximum(g_lo, (pi - p * g_hi) / (1.0 - p)) if p < 1.0 else g_lo
        hi = np.minimum(g_hi, (pi - p * g_lo) / (1.0 - p)) if p < 1.0 else g_hi
        self.q_lo = np.clip(np.minimum(lo, pi), 0.0, 1.0)
        self.q_hi = np.clip(np.maximum(hi, pi), 0.0, 1.0)
        self.t_lo, self.t_hi = odds_interval(prob.p_hat, params.delta)
        # per-action ascending / descending orders of the continuation targets
        self.order_asc = np.argsort(prob.y, axis=1, kind="stable")
        self.order_desc = np.argsort(-prob.y, axis=1, kind="stable")
        self.phat_y = np.einsum("aj,aj->a", prob.p_hat, prob.y)
        # contribution of unsupported actions reached by pi_e is a constant
        unsup = ~self.sup
        self.const = float(
            (prob.pi_e * unsup * prob.fallback_value).sum()
        )

    # -- objective -----------------------------------------------------------

    def _action_values(self, a: int, q0: np.ndarray) -> np.ndarray:
        """h_a evaluated at a batch of scalar q0 values (shape (n,))."""
        prob = self.prob
        p = self.p
        pi = prob.pi_hat[a]
        pe = prob.pi_e[a]
        if pe == 0.0:
            return np.zeros_like(q0)
        q1 = (pi - (1.0 - p) * q0) / p
        const = pe * (pi / q1) * self.phat_y[a]
        kappa = pe * (1.0 - p) * (1.0 - q0 / q1)
        # bounds on P(.|x, u=0, a): delta box intersected with the box induced
        # by requiring the eliminated P(.|x, u=1, a) to stay in its delta box
        base = pi * prob.p_hat[a]                           # [X]
        denom = (1.0 - p) * q0                              # [n]
        ind_lo = (base[None, :] - (p * q1)[:, None] * self.t_hi[a][None, :]) / denom[:, None]
        ind_hi = (base[None, :] - (p * q1)[:, None] * self.t_lo[a][None, :]) / denom[:, None]
        L = np.maximum(self.t_lo[a][None, :], ind_lo)
        H = np.minimum(self.t_hi[a][None, :], ind_hi)
        oa, od = self.order_asc[a], self.order_desc[a]
        y = prob.y[a]
        vmin, _ = _waterfill_sorted(y[oa], L[:, oa], H[:, oa])
        vmax_neg, _ = _waterfill_sorted(-y[od], L[:, od], H[:, od])
        vmax = -vmax_neg
        inner = np.where(kappa >= 0.0, kappa * vmin, kappa * vmax)
        return const + inner

    def value_batch(self, Q0: np.ndarray) -> np.ndarray:
        """Objective at a batch of u=0 behavior rows, shape (n, A)."""
        total = np.full(Q0.shape[0], self.const)
        for a in range(self.A):
            if self.sup[a]:
                total = total + self._action_values(a, Q0[:, a])
        return total

    # -- search --------------------------------------------------------------

    def _feasible(self, Q0: np.ndarray) -> np.ndarray:
        ok = np.all(Q0 >= self.q_lo[None, :] - 1e-12, axis=1)
        ok &= np.all(Q0 <= self.q_hi[None, :] + 1e-12, axis=1)
        ok &= np.abs(Q0[:, self.sup].sum(axis=1) - 1.0) < 1e-9
        return ok

    def _vertex_candidates(self) -> np.ndarray:
        sup_idx = np.flatnonzero(self.sup)
        cands = [self.prob.pi_hat.copy()]
        if len(sup_idx) > 1:
            for j in sup_idx:
                others = [i for i in sup_idx if i != j]
                for pattern in itertools.product((0, 1), repeat=len(others)):
                    q = np.zeros(self.A)
                    for i, side in zip(others, pattern):
                        q[i] = self.q_lo[i] if side == 0 else self.q_hi[i]
                    q[j] = 1.0 - q[sup_idx].sum()
                    if self.q_lo[j] - 1e-12 <= q[j] <= self.q_hi[j] + 1e-12:
                        q[j] = np.clip(q[j], self.q_lo[j], self.q_hi[j])
                        cands.append(q)
        return np.array(cands)

    def _grid_candidates_2(self) -> np.ndarray:
        i, j = np.flatnonzero(self.sup)
        lo = max(self.q_lo[i], 1.0 - self.q_hi[j])
        hi = min(self.q_hi[i], 1.0 - self.q_lo[j])
        if hi < lo:
            return np.empty((0, self.A))
        t = np.linspace(lo, hi, _GRID_1D)
        Q = np.zeros((t.shape[0], self.A))
        Q[:, i] = t
        Q[:, j] = 1.0 - t
        return Q

    def _dp_candidate(self) -> np.ndarray | None:
        """Approximate argmin by a min-plus DP over a shared budget grid."""
        sup_idx = np.flatnonzero(self.sup)
        K = _DP_STEPS
        delta = 1.0 / K
        grids = []
        for a in sup_idx:
            i0 = int(np.ceil(self.q_lo[a] / delta - 1e-12))
            i1 = int(np.floor(self.q_hi[a] / delta + 1e-12))
            if i1 < i0:
                return None
            grids.append((a, np.arange(i0, i1 + 1)))
        G = np.full(K + 1, np.inf)
        G[0] = 0.0
        choices = []
        for a, idx in grids:
            h = self._action_values(a, idx * delta)
            b = np.arange(K + 1)
            prev = b[:, None] - idx[None, :]
            valid = (prev >= 0) & (prev <= K)
            prev_c = np.clip(prev, 0, K)
            tab = np.where(valid, G[prev_c] + h[None, :], np.inf)
            pick = tab.argmin(axis=1)
            choices.append(pick)
            G = tab[b, pick]
        if not np.isfinite(G[K]):
            return None
        q = np.zeros(self.A)
        b = K
        for (a, idx), pick in zip(reversed(grids), reversed(choices)):
            i = idx[pick[b]]
            q[a] = i * delta
            b -= i
        return q

    def _polish(self, q0: np.ndarray, value: float) -> tuple[np.ndarray, float]:
        sup_idx = np.flatnonzero(self.sup)
        if len(sup_idx) < 2:
            return q0, value
        pairs = [(i, j) for i in sup_idx for j in sup_idx if i != j]
        step = 2.0 / _DP_STEPS
        while step > _POLISH_TOL:
            moves = []
            for i, j in pairs:
                q = q0.copy()
                t = min(step, self.q_hi[i] - q[i], q[j] - self.q_lo[j])
                if t <= 0.0:
                    continue
                q[i] += t
                q[j] -= t
                moves.append(q)
            improved = False
            if moves:
                Q = np.array(moves)
                vals = self.value_batch(Q)
                k = int(vals.argmin())
                if vals[k] < value - 1e-15:
                    q0, value = Q[k], float(vals[k])
                    improved = True
            if not improved:
                step *= 0.5
        return q0, value

    def solve(self) -> tuple[float, np.ndarray]:
        """Returns (v_lower, optimal q0 row)."""
        n_sup = int(self.sup.sum())
        starts = [self.prob.pi_hat.copy()]
        if n_sup == 2:
            grid = self._grid_candidates_2()
            if grid.size:
                vals = self.value_batch(grid)
                starts.append(grid[int(vals.argmin())])
        elif n_sup > 2:
            dp = self._dp_candidate()
            if dp is not None:
                starts.append(dp)
        verts = self._vertex_candidates()
        if verts.size:
            vals = self.value_batch(verts)
            order = np.argsort(vals, kind="stable")[:3]
            starts.extend(verts[k] for k in order)
        starts = np.array(starts)
        ok = self._feasible(starts)
        if not ok.any():
            raise InfeasibleError("no feasible u=0 behavior row; cannot happen")
        starts = starts[ok]
        vals = self.value_batch(starts)
        best_q, best_v = None, np.inf
        seen = set()
        order = np.argsort(vals, kind="stable")
        for k in order[:2]:
            key = tuple(np.round(starts[k], 6))
            if key in seen:
                continue
            seen.add(key)
            q, v = self._polish(starts[k].copy(), float(vals[k]))
            if v < best_v:
                best_q, best_v = q, v
        return best_v, best_q

    # -- candidate extraction ------------------------------------------------

    def extract(self, q0: np.ndarray) -> StateMinimizer:
        prob = self.prob
        p = self.p
        A, X = prob.p_hat.shape
        q1 = np.where(self.sup, (prob.pi_hat - (1.0 - p) * q0) / p, 0.0)
        P0 = np.empty((A, X))
        P1 = np.empty((A, X))
        for a in range(A):
            if not self.sup[a]:
                P0[a] = P1[a] = np.full(X, 1.0 / X)
                continue
            pi = prob.pi_hat[a]
            base = pi * prob.p_hat[a]
            denom = (1.0 - p) * q0[a]
            ind_lo = (base - p * q1[a] * self.t_hi[a]) / denom
            ind_hi = (base - p * q1[a] * self.t_lo[a]) / denom
            L = np.maximum(self.t_lo[a], ind_lo)
            H = np.minimum(self.t_hi[a], ind_hi)
            kappa = prob.pi_e[a] * (1.0 - p) * (1.0 - q0[a] / q1[a])
            if kappa >= 0.0:
                order = self.order_asc[a]
            else:
                order = self.order_desc[a]
            sign = 1.0 if kappa >= 0.0 else -1.0
            _, v_s = _waterfill_sorted(
                sign * prob.y[a][order], L[None, order], H[None, order]
            )
            row = np.empty(X)
            row[order] = v_s[0]
            P0[a] = np.clip(row, 0.0, 1.0)
            P0[a] /= P0[a].sum()
            P1[a] = (base - (1.0 - p) * q0[a] * P0[a]) / (p * q1[a])
            P1[a] = np.clip(P1[a], 0.0, 1.0)
            P1[a] /= P1[a].sum()
        # normalize behavior rows over the support (unsupported entries are 0)
        q0 = np.where(self.sup, q0, 0.0)
        s0, s1 = q0.sum(), q1.sum()
        return StateMinimizer(q0=q0 / s0, q1=q1 / s1, P0=P0, P1=P1)


def solve_state(prob: StateUncertaintyProblem):
    """Worst-case one-step value for a single state.

    Returns (v_lower, StateMinimizer, diagnostics)."""
    params = prob.params
    if params.p in (0.0, 1.0) or params.gamma == 1.0 or params.delta == 1.0:
        # a single active u (or a collapsed box on either margin) forces the
        # nominal model
        v = float(
            np.where(
                prob.support,
                np.einsum("aj,aj->a", prob.p_hat, prob.y),
                prob.fallback_value,
            ) @ prob.pi_e
        )
        A, X = prob.p_hat.shape
        P = np.where(
            prob.support[:, None], prob.p_hat, np.full((A, X), 1.0 / X)
        )
        mini = StateMinimizer(
            q0=prob.pi_hat.copy(), q1=prob.pi_hat.copy(), P0=P.copy(), P1=P.copy()
        )
        return v, mini, {"shortcut": True}
    solver = _StateSolver(prob)
    v, q0 = solver.solve()
    mini = solver.extract(q0)
    return v, mini, {"shortcut": False}


@dataclass
class RobustBoundResult:
    v_lower: ValueTable
    expected_lower: float
    candidate: CandidateModel
    snapshots: dict = field(default_factory=dict)  # horizon -> (expected, CandidateModel)
    diagnostics: dict = field(default_factory=dict)


def _assemble(minimizers: list[StateMinimizer], p: float) -> CandidateModel:
    behavior_u = np.stack(
        [np.stack([m.q0 for m in minimizers]), np.stack([m.q1 for m in minimizers])],
        axis=1,
    )
    transitions_u = np.stack(
        [np.stack([m.P0 for m in minimizers]), np.stack([m.P1 for m in minimizers])],
        axis=1,
    )
    return CandidateModel(behavior_u=behavior_u, transitions_u=transitions_u, p=p)


def robust_value_iteration(
    model: EmpiricalModel,
    rewards,
    gamma: float,
    initial_dist,
    pi_e: PolicyTable,
    params: SensitivityParams,
    horizon: int,
    snapshot_horizons=(),
) -> RobustBoundResult:
    """T iterations of the per-state worst-case minimization from V_0 = 0.

    The candidate model is assembled from the final iteration's minimizers;
    snapshot_horizons additionally records (bound, candidate) at intermediate
    horizons in one pass."""
    if horizon < 1:
        raise ValidationError("horizon must be >= 1")
    rewards = np.asarray(rewards, dtype=float)
    initial_dist = np.asarray(initial_dist, dtype=float)
    X = model.n_states
    r_floor = _fallback_floor(model, rewards)
    v = np.zeros(X)
    snapshots = {}
    minimizers: list[StateMinimizer] = []
    for k in range(1, horizon + 1):
        fallback = r_floor + gamma * v.min()
        y = rewards + gamma * v[None, None, :]
        new_v = np.empty(X)
        minimizers = []
        for x in range(X):
            prob = StateUncertaintyProblem(
                pi_hat=model.pi_hat[x],
                p_hat=model.p_hat[x],
                support=model.support[x],
                pi_e=pi_e.probs[x],
                y=y[x],
                params=params,
                fallback_value=fallback,
            )
            new_v[x], mini, _ = solve_state(prob)
            minimizers.append(mini)
        v = new_v
        if k in snapshot_horizons and k != horizon:
            snapshots[k] = (
                float(initial_dist @ v), _assemble(minimizers, params.p)
            )
    candidate = _assemble(minimizers, params.p)
    expected = float(initial_dist @ v)
    if horizon in snapshot_horizons:
        snapshots[horizon] = (expected, candidate)
    return RobustBoundResult(
        v_lower=ValueTable(v, horizon=horizon),
        expected_lower=expected,
        candidate=candidate,
        snapshots=snapshots,
    )


def tightness_check(
    model: EmpiricalModel,
    rewards,
    gamma: float,
    initial_dist,
    pi_e: PolicyTable,
    params: SensitivityParams,
    horizon: int,
    candidate: CandidateModel,
    bound: float | None = None,
) -> float:
    """Gap between the evaluation-policy value in the candidate model and the
    robust bound.  Nonnegative (up to tolerance) because the candidate is one
    feasible model and the bound minimizes over all of them."""
    from .confounded import full_information_value

    candidate.validate(model, params)
    if bound is None:
        bound = robust_value_iteration(
            model, rewards, gamma, initial_dist, pi_e, params, horizon
        ).expected_lower
    cm = candidate.to_confounded(rewards, initial_dist, gamma)
    cand_value = full_information_value(cm, pi_e, horizon)
    return cand_value - bound


def single_step_bound(
    model: EmpiricalModel,
    rewards,
    gamma: float,
    initial_dist,
    pi_e: PolicyTable,
    params: SensitivityParams,
    horizon: int,
) -> RobustBoundResult:
    """Confounding in the initial step only: T-1 nominal value-iteration steps
    followed by a single worst-case sweep."""
    if horizon < 1:
        raise ValidationError("horizon must be >= 1")
    rewards = np.asarray(rewards, dtype=float)
    initial_dist = np.asarray(initial_dist, dtype=float)
    X = model.n_states
    r_floor = _fallback_floor(model, rewards)
    v = np.zeros(X)
    for _ in range(horizon - 1):
        q = np.einsum("xay,xay->xa", model.p_hat, rewards + gamma * v[None, None, :])
        fallback = r_floor + gamma * v.min()
        q = np.where(model.support, q, fallback)
        v = np.einsum("xa,xa->x", pi_e.probs, q)
    fallback = r_floor + gamma * v.min()
    y = rewards + gamma * v[None, None, :]
    new_v = np.empty(X)
    minimizers = []
    for x in range(X):
        prob = StateUncertaintyProblem(
            pi_hat=model.pi_hat[x],
            p_hat=model.p_hat[x],
            support=model.support[x],
            pi_e=pi_e.probs[x],
            y=y[x],
            params=params,
            fallback_value=fallback,
        )
        val, mini, _ = solve_state(prob)
        new_v[x] = val
        minimizers.append(mini)
    expected = float(initial_dist @ new_v)
    return RobustBoundResult(
        v_lower=ValueTable(new_v, horizon=horizon),
        expected_lower=expected,
        candidate=_assemble(minimizers, params.p),
    )
