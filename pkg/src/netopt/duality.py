"""Decomposition methods for problems coupled through linear constraints.

Four ways to split ``min sum_i f_i(x^i)`` subject to ``sum_i G_i x^i = g``:

* allocation splitting (``ps_*``): give each agent a target for its coupling
  contribution and move the targets along multiplier disagreements;
* dual subgradient ascent (``ds_*``), with a per-row-block variant whose
  floating-point results match the centralized update bit for bit;
* fast dual gradient on a smoothed dual (``dfg_*``), quadratic prox;
* Newton ascent on a log-barrier smoothed dual (``DipSolver``).

Multiplier convention: L = f + lam^T (sum G_i x^i - g), so the dual gradient
is the coupling residual and allocation sensitivities are -lam.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .problems import Point, ProblemDCCC, QuadCost
from .qp import (
    INFEASIBLE,
    OPTIMAL,
    PROX_LOGBARRIER,
    PROX_QUADRATIC,
    NotStronglyConvex,
    _barrier_parts,
    barrier_complexity,
    solve_local_qp,
    solve_smoothed,
)

__all__ = [
    "SubproblemInfeasible",
    "coupling_norm",
    "strong_convexity",
    "prox_centers",
    "prox_diameter",
    "smoothing_for",
    "smoothing_lipschitz",
    "dual_value_and_subgradient",
    "recover_primal",
    "gather_scatter_counts",
    "DualState",
    "ds_default_alpha",
    "ds_step",
    "ds_step_blocks",
    "PsState",
    "ps_init",
    "ps_step",
    "DfgState",
    "dfg_init",
    "dfg_step",
    "dual_hessian",
    "DipResult",
    "DipSolver",
    "dip_solve",
]


class SubproblemInfeasible(RuntimeError):
    """An agent's subproblem has no feasible point for its current target."""

    def __init__(self, agent: int, msg: str = ""):
        self.agent = agent
        super().__init__(msg or f"subproblem of agent {agent} is infeasible")


# ---------------------------------------------------------------------------
# shared quantities


def coupling_norm(problem: ProblemDCCC) -> float:
    """Spectral norm of the horizontally stacked coupling matrix."""
    cached = getattr(problem, "_coupling_norm", None)
    if cached is None:
        S = np.zeros((problem.rhs.size, problem.rhs.size))
        for G in problem.couplings:
            S += G @ G.T
        cached = float(np.sqrt(max(np.linalg.eigvalsh(S)[-1], 0.0)))
        object.__setattr__(problem, "_coupling_norm", cached)
    return cached


def strong_convexity(problem: ProblemDCCC) -> float:
    """Worst-case strong convexity modulus of the separable cost (>= 0)."""
    return max(0.0, 2.0 * min(c.min_eig() for c in problem.costs))


def prox_centers(problem: ProblemDCCC) -> list:
    """Interior points used as prox centers, one per agent (cached)."""
    cached = getattr(problem, "_prox_centers", None)
    if cached is None:
        cached = [s.interior_point() for s in problem.local_sets]
        object.__setattr__(problem, "_prox_centers", cached)
    return cached


def prox_diameter(problem: ProblemDCCC) -> float:
    """Upper bound on the quadratic prox over any agent's set.

    Uses the farthest corner of each set's coordinate bounding box, so for
    polyhedra this overestimates (which only makes the smoothing safer).
    """
    centers = prox_centers(problem)
    worst = 0.0
    for fset, c in zip(problem.local_sets, centers):
        lo, up = fset.coordinate_ranges()
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(up))):
            raise ValueError("prox term is unbounded on an unbounded set")
        corner = np.maximum((up - c) ** 2, (lo - c) ** 2)
        worst = max(worst, 0.5 * float(corner.sum()))
    return worst


def smoothing_for(problem: ProblemDCCC, eps: float) -> float:
    """Smoothing weight that keeps the smoothing bias below eps / 2."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    return eps / (2.0 * prox_diameter(problem))


def smoothing_lipschitz(problem: ProblemDCCC, mu: float) -> float:
    """Gradient Lipschitz constant of the smoothed dual."""
    denom = strong_convexity(problem) + mu
    if denom <= 0:
        raise NotStronglyConvex("need mu > 0 or strongly convex costs")
    return coupling_norm(problem) ** 2 / denom


def _ordered_residual(problem: ProblemDCCC, xs) -> np.ndarray:
    # fixed agent order; per-block slicing of this sum must stay bit-identical
    acc = np.zeros(problem.rhs.size)
    for G, x in zip(problem.couplings, xs):
        acc += G @ x
    acc -= problem.rhs
    return acc


def dual_value_and_subgradient(
    problem: ProblemDCCC,
    lam: np.ndarray,
    mu: float = 0.0,
    prox: str = PROX_QUADRATIC,
    x0s=None,
    tol: float = 1e-10,
):
    """Evaluate the (optionally smoothed) dual at ``lam``.

    Returns ``(value, subgradient, minimizers)``. The subgradient is the
    coupling residual at the inner minimizers; with ``mu > 0`` it is the
    exact gradient of the smoothed dual.
    """
    lam = np.asarray(lam, dtype=float)
    if lam.shape != problem.rhs.shape:
        raise ValueError("multiplier has wrong dimension")
    centers = prox_centers(problem) if (mu > 0 and prox == PROX_QUADRATIC) else None
    xs = []
    value = 0.0
    for i, (cost, fset, G) in enumerate(
        zip(problem.costs, problem.local_sets, problem.couplings)
    ):
        shift = G.T @ lam
        x0 = None if x0s is None else x0s[i]
        if mu == 0.0:
            sol = solve_local_qp(cost.shifted(shift), fset, tol=tol, x0=x0)
            if sol.status == INFEASIBLE:
                raise SubproblemInfeasible(i)
            x = sol.x
        else:
            x = solve_smoothed(
                cost,
                fset,
                shift,
                mu,
                prox=prox,
                tol=tol,
                x0=x0,
                center=None if centers is None else centers[i],
            )
        value += cost.value(x) + float(shift @ x)
        if mu > 0.0:
            if prox == PROX_QUADRATIC:
                value += 0.5 * mu * float(np.sum((x - centers[i]) ** 2))
            else:
                bval, _, _ = _barrier_parts(fset, x)
                value += mu * float(bval)
        xs.append(x)
    value -= float(lam @ problem.rhs)
    return value, _ordered_residual(problem, xs), xs


def recover_primal(problem: ProblemDCCC, xs) -> Point:
    return Point(xs)


def gather_scatter_counts(problem: ProblemDCCC) -> dict:
    """Scalars moved by one gather of residual rows plus one multiplier push.

    With row blocks, each non-owner neighbor trades ``len(rows)`` scalars
    with the owner in both directions. Without blocks, agent 0 coordinates.
    """
    counts = {}

    def add(dst, src, n):
        if dst != src and n:
            counts[(dst, src)] = counts.get((dst, src), 0) + n

    if problem.row_blocks:
        for blk in problem.row_blocks:
            r = blk.rows.size
            for i in blk.neighbors:
                add(blk.owner, i, r)
                add(i, blk.owner, r)
    else:
        m = problem.rhs.size
        for i in range(1, problem.n_agents):
            add(0, i, m)
            add(i, 0, m)
    return counts


# ---------------------------------------------------------------------------
# dual subgradient ascent


@dataclass
class DualState:
    lam: np.ndarray
    k: int = 0
    xs: list | None = None
    value: float | None = None

    def __post_init__(self):
        self.lam = np.asarray(self.lam, dtype=float).ravel()


def ds_default_alpha(problem: ProblemDCCC) -> float:
    return 1.0 / coupling_norm(problem) ** 2


def _step_of(rule, k):
    return rule(k) if callable(rule) else float(rule)


def ds_step(
    problem: ProblemDCCC,
    state: DualState,
    rule,
    ledger=None,
    tol: float = 1e-10,
) -> DualState:
    """One ascent step ``lam += alpha * (coupling residual at the minimizers)``."""
    value, sub, xs = dual_value_and_subgradient(
        problem, state.lam, x0s=state.xs, tol=tol
    )
    alpha = _step_of(rule, state.k)
    lam = state.lam + alpha * sub
    if ledger is not None:
        ledger.record_round(gather_scatter_counts(problem))
    return DualState(lam, state.k + 1, xs, value)


def ds_step_blocks(
    problem: ProblemDCCC,
    state: DualState,
    rule,
    ledger=None,
    tol: float = 1e-10,
) -> DualState:
    """Row-block form of ``ds_step``: each owner updates only its rows using
    its neighbors' contributions.

    Non-neighbor coupling blocks are exactly zero, so skipping them cannot
    change any accumulated float; the result matches ``ds_step`` bitwise.
    """
    if not problem.row_blocks:
        raise ValueError("problem has no row blocks")
    value, _, xs = dual_value_and_subgradient(
        problem, state.lam, x0s=state.xs, tol=tol
    )
    alpha = _step_of(rule, state.k)
    lam = np.empty_like(state.lam)
    contribs = [G @ x for G, x in zip(problem.couplings, xs)]
    for blk in problem.row_blocks:
        rows = blk.rows
        acc = np.zeros(rows.size)
        nbrs = set(blk.neighbors)
        for i in range(problem.n_agents):
            if i in nbrs:
                acc += contribs[i][rows]
        acc -= problem.rhs[rows]
        lam[rows] = state.lam[rows] + alpha * acc
    if ledger is not None:
        ledger.record_round(gather_scatter_counts(problem))
    return DualState(lam, state.k + 1, xs, value)


# ---------------------------------------------------------------------------
# allocation splitting


@dataclass
class PsState:
    """Targets for the first M-1 agents; the last agent absorbs the rest."""

    t: np.ndarray
    k: int = 0
    xs: list = field(default_factory=list)
    lams: np.ndarray | None = None
    values: np.ndarray | None = None

    @property
    def master_value(self) -> float:
        return float(self.values.sum())


def _ps_solve_all(problem: ProblemDCCC, t: np.ndarray, x0s, tol: float):
    """Solve every agent's target-constrained subproblem.

    Returns (ok, bad_agent, xs, lams, values); ``ok`` is False when some
    subproblem has no feasible point.
    """
    M = problem.n_agents
    last = problem.rhs - t.sum(axis=0)
    xs, lams, values = [], [], []
    for i, (cost, fset, G) in enumerate(
        zip(problem.costs, problem.local_sets, problem.couplings)
    ):
        target = t[i] if i < M - 1 else last
        sol = solve_local_qp(
            cost, fset, eq=(G, target), tol=tol, x0=None if x0s is None else x0s[i]
        )
        if sol.status == INFEASIBLE:
            return False, i, None, None, None
        if sol.status != OPTIMAL:
            raise RuntimeError(f"agent {i} subproblem did not converge")
        xs.append(sol.x)
        lams.append(sol.eq_multipliers)
        values.append(cost.value(sol.x))
    return True, -1, xs, np.asarray(lams), np.asarray(values)


def ps_init(problem: ProblemDCCC, t0=None, tol: float = 1e-10) -> PsState:
    """Start from targets induced by interior points (or explicit ``t0``).

    The implied target for the last agent must be feasible for it; interior
    points of jointly feasible sets (as the generators construct) satisfy
    this by design.
    """
    M = problem.n_agents
    if M < 2:
        raise ValueError("allocation splitting needs at least two agents")
    if t0 is None:
        centers = prox_centers(problem)
        t0 = np.stack(
            [problem.couplings[i] @ centers[i] for i in range(M - 1)]
        )
    t0 = np.asarray(t0, dtype=float)
    if t0.shape != (M - 1, problem.rhs.size):
        raise ValueError("t0 must be (n_agents - 1, n_coupling)")
    ok, bad, xs, lams, values = _ps_solve_all(problem, t0, None, tol)
    if not ok:
        raise SubproblemInfeasible(bad, "initial allocation is infeasible")
    return PsState(t0, 0, xs, lams, values)


def ps_step(
    problem: ProblemDCCC,
    state: PsState,
    rule,
    max_halvings: int = 30,
    ledger=None,
    tol: float = 1e-10,
) -> PsState:
    """Move each target against its multiplier gap, halving on infeasibility.

    The update is ``t^i -= alpha (lam^M - lam^i)``; a trial that makes any
    subproblem infeasible halves alpha, up to ``max_halvings`` times.
    """
    M = problem.n_agents
    direction = state.lams[M - 1] - state.lams[: M - 1]
    alpha = _step_of(rule, state.k)
    trials = 0
    for _ in range(max_halvings + 1):
        trials += 1
        t_try = state.t - alpha * direction
        ok, bad, xs, lams, values = _ps_solve_all(problem, t_try, state.xs, tol)
        if ok:
            if ledger is not None:
                counts = {}
                m = problem.rhs.size
                for i in range(M - 1):
                    counts[(M - 1, i)] = m
                    counts[(i, M - 1)] = m
                ledger.record_round(counts, repeat=trials)
            return PsState(t_try, state.k + 1, xs, lams, values)
        alpha *= 0.5
    raise SubproblemInfeasible(bad, "backtracking could not restore feasibility")


# ---------------------------------------------------------------------------
# fast gradient on the quadratically smoothed dual


@dataclass
class DfgState:
    lam: np.ndarray
    lam_bar: np.ndarray
    value_bar: float = -np.inf
    t: float = 1.0
    k: int = 0
    xs: list | None = None
    restarts: int = 0

    def __post_init__(self):
        self.lam = np.asarray(self.lam, dtype=float).ravel()
        self.lam_bar = np.asarray(self.lam_bar, dtype=float).ravel()


def dfg_init(problem: ProblemDCCC, lam0=None) -> DfgState:
    lam0 = np.zeros(problem.rhs.size) if lam0 is None else np.asarray(lam0, float)
    return DfgState(lam0.copy(), lam0.copy())


def dfg_step(
    problem: ProblemDCCC,
    state: DfgState,
    mu: float,
    lip: float | None = None,
    momentum: bool = True,
    ledger=None,
    tol: float = 1e-10,
) -> DfgState:
    """One accelerated ascent step on the smoothed dual.

    A candidate is taken from the extrapolated point; if its smoothed dual
    value drops below the last accepted one, the candidate is rejected and
    the momentum is restarted from the accepted iterate, which keeps the
    accepted values monotone. ``momentum=False`` gives plain gradient ascent.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    if lip is None:
        lip = smoothing_lipschitz(problem, mu)

    _, grad, xs = dual_value_and_subgradient(
        problem, state.lam, mu=mu, x0s=state.xs, tol=tol
    )
    cand = state.lam + grad / lip

    if not momentum:
        if ledger is not None:
            ledger.record_round(gather_scatter_counts(problem))
        return DfgState(cand, cand, -np.inf, 1.0, state.k + 1, xs, state.restarts)

    val_c, _, xs_c = dual_value_and_subgradient(
        problem, cand, mu=mu, x0s=xs, tol=tol
    )
    if ledger is not None:
        ledger.record_round(gather_scatter_counts(problem), repeat=2)
    floor = state.value_bar - 1e-12 * (1.0 + abs(state.value_bar))
    if val_c >= floor:
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * state.t**2))
        beta = (state.t - 1.0) / t_next
        lam_next = cand + beta * (cand - state.lam_bar)
        return DfgState(
            lam_next, cand, val_c, t_next, state.k + 1, xs_c, state.restarts
        )
    # candidate from the extrapolation went downhill: restart at the anchor
    return DfgState(
        state.lam_bar.copy(),
        state.lam_bar.copy(),
        state.value_bar,
        1.0,
        state.k + 1,
        xs_c,
        state.restarts + 1,
    )


# ---------------------------------------------------------------------------
# Newton ascent on the barrier-smoothed dual


def _solve_sym(K, rhs):
    try:
        return np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(K, rhs, rcond=None)[0]


def dual_hessian(
    problem: ProblemDCCC, xs, mu: float, tikhonov: float = 0.0
) -> np.ndarray:
    """Hessian of the barrier-smoothed dual at inner minimizers ``xs``.

    Equals ``-sum_i G_i K_i^{-1} G_i^T`` with ``K_i = 2 H_i + mu B_i''``;
    sets carrying equality rows contribute through the reduced KKT system
    instead of a plain inverse.
    """
    m = problem.rhs.size
    S = np.zeros((m, m))
    for cost, fset, G, x in zip(
        problem.costs, problem.local_sets, problem.couplings, xs
    ):
        _, _, bhess = _barrier_parts(fset, np.asarray(x, dtype=float))
        if bhess is None:
            raise ValueError("minimizer is not strictly interior")
        K = 2.0 * cost.H + mu * bhess
        A_eq = getattr(fset, "A_eq", None)
        if A_eq is not None and A_eq.shape[0]:
            p = A_eq.shape[0]
            n = cost.dim
            kkt = np.zeros((n + p, n + p))
            kkt[:n, :n] = K
            kkt[:n, n:] = A_eq.T
            kkt[n:, :n] = A_eq
            rhs = np.zeros((n + p, m))
            rhs[:n] = G.T
            Y = _solve_sym(kkt, rhs)[:n]
        else:
            Y = _solve_sym(K, G.T)
        S += G @ Y
    S = 0.5 * (S + S.T)
    if tikhonov:
        S += tikhonov * np.eye(m)
    return -S


@dataclass
class DipResult:
    lam: np.ndarray
    xs: list
    value: float
    residual: np.ndarray
    iterations: int
    stages: list
    status: str


class DipSolver:
    """Path-following Newton ascent on the barrier-smoothed dual.

    Stages shrink the barrier weight geometrically; each stage runs damped
    Newton steps (Armijo on the smoothed dual value) until the dual gradient
    is small relative to the current weight. The run stops once the weight
    times the total barrier complexity is at most ``eps``.
    """

    def __init__(
        self,
        problem: ProblemDCCC,
        eps: float = 1e-4,
        mu0: float = 1.0,
        shrink: float = 0.2,
        inner_tol: float = 0.1,
        armijo: float = 1e-4,
        max_newton: int = 2000,
        qp_tol: float = 1e-10,
        tikhonov: float = 1e-12,
    ):
        if eps <= 0:
            raise ValueError("eps must be positive")
        if not 0 < shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")
        self.problem = problem
        self.eps = eps
        self.mu0 = mu0
        self.shrink = shrink
        self.inner_tol = inner_tol
        self.armijo = armijo
        self.max_newton = max_newton
        self.qp_tol = qp_tol
        self.tikhonov = tikhonov
        self.complexity = sum(barrier_complexity(s) for s in problem.local_sets)
        if self.complexity < 1:
            raise ValueError("sets carry no barrier terms")

    def _eval(self, lam, mu, xs):
        return dual_value_and_subgradient(
            self.problem, lam, mu=mu, prox=PROX_LOGBARRIER, x0s=xs, tol=self.qp_tol
        )

    def solve(self, lam0=None, callback=None) -> DipResult:
        lam = (
            np.zeros(self.problem.rhs.size)
            if lam0 is None
            else np.asarray(lam0, dtype=float).copy()
        )
        mu = self.mu0
        xs = None
        total = 0
        stages = []
        status = OPTIMAL
        val, grad, xs = self._eval(lam, mu, xs)
        while True:
            stage_start = total
            best_norm = np.inf
            flat = 0
            while np.linalg.norm(grad) > self.inner_tol * mu:
                if total >= self.max_newton:
                    status = "max_iter"
                    break
                hess = dual_hessian(self.problem, xs, mu, tikhonov=0.0)
                step = _solve_sym(-hess + self.tikhonov * np.eye(lam.size), grad)
                slope = float(grad @ step)
                if slope <= 0:
                    step = grad.copy()
                    slope = float(grad @ grad)
                s = 1.0
                accepted = False
                for _ in range(40):
                    val_t, grad_t, xs_t = self._eval(lam + s * step, mu, xs)
                    if val_t >= val + self.armijo * s * slope:
                        accepted = True
                        break
                    s *= 0.5
                total += 1
                if not accepted:
                    status = "stalled"
                    break
                lam = lam + s * step
                val, grad, xs = val_t, grad_t, xs_t
                if callback is not None:
                    callback(total, lam, val, grad, mu, xs)
                # guard against grinding on the inner solves' accuracy floor
                norm = np.linalg.norm(grad)
                if norm > 0.9 * best_norm:
                    flat += 1
                    if flat >= 5:
                        break
                else:
                    flat = 0
                best_norm = min(best_norm, norm)
            stages.append((mu, total - stage_start))
            if status != OPTIMAL or mu * self.complexity <= self.eps:
                break
            mu *= self.shrink
            val, grad, xs = self._eval(lam, mu, xs)
        return DipResult(lam, xs, val, grad, total, stages, status)


def dip_solve(problem: ProblemDCCC, eps: float = 1e-4, **kwargs) -> DipResult:
    return DipSolver(problem, eps=eps, **kwargs).solve()
