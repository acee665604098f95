"""Consensus-based methods for shared-variable problems.

All agents hold their own estimate of the one decision vector, mix estimates
over a communication graph, and take projected gradient steps on their private
cost. State is a dense (M, d) array; one row per agent.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .network import WeightSchedule, check_joint_connectivity, consensus_round
from .problems import Box, ProblemDCx, project

__all__ = [
    "HarmonicStep",
    "ConstantStep",
    "ConsensusState",
    "CycleState",
    "make_state",
    "agent_gradients",
    "agent_values",
    "project_rows",
    "disagreement",
    "gradient_lipschitz",
    "default_alpha",
    "dgp1_step",
    "dgp2_step",
    "incremental_cycle",
    "check_preconditions",
]


@dataclass
class HarmonicStep:
    """Diminishing step size a / (b + k)."""

    a: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ValueError("step parameters must be positive")

    def __call__(self, k: int) -> float:
        return self.a / (self.b + k)


@dataclass
class ConstantStep:
    alpha: float

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("step size must be positive")

    def __call__(self, k: int) -> float:
        return self.alpha


@dataclass
class ConsensusState:
    """Per-agent estimates stacked as rows, plus the iteration counter."""

    x: np.ndarray
    k: int = 0

    def __post_init__(self):
        self.x = np.atleast_2d(np.asarray(self.x, dtype=float))

    def mean(self) -> np.ndarray:
        return self.x.mean(axis=0)


@dataclass
class CycleState:
    """Single estimate passed around a cycle of agents."""

    z: np.ndarray
    k: int = 0

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=float).ravel()


def make_state(problem: ProblemDCx, x0=None) -> ConsensusState:
    """Initial state: every agent starts from ``x0`` (default: set interior)."""
    if x0 is None:
        x0 = problem.common_set.interior_point()
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.shape != (problem.dim,):
        raise ValueError(f"x0 must have shape ({problem.dim},)")
    return ConsensusState(np.tile(x0, (problem.n_agents, 1)), 0)


def agent_gradients(problem: ProblemDCx, points: np.ndarray) -> np.ndarray:
    """Row i is the gradient of agent i's cost at row i of ``points``."""
    H, q, _ = problem.stacked_arrays()
    return 2.0 * np.einsum("mij,mj->mi", H, points) + q


def agent_values(problem: ProblemDCx, points: np.ndarray) -> np.ndarray:
    H, q, c0 = problem.stacked_arrays()
    quad = np.einsum("mi,mij,mj->m", points, H, points)
    return quad + np.einsum("mi,mi->m", q, points) + c0


def project_rows(fset, points: np.ndarray) -> np.ndarray:
    """Project every row of ``points`` onto ``fset``. Boxes clip in one shot."""
    if isinstance(fset, Box):
        return np.clip(points, fset.lower, fset.upper)
    return np.stack([project(fset, row) for row in points])


def disagreement(points: np.ndarray) -> float:
    """Largest distance from any agent's estimate to the network average."""
    centered = points - points.mean(axis=0)
    return float(np.max(np.linalg.norm(centered, axis=1), initial=0.0))


def gradient_lipschitz(problem: ProblemDCx) -> float:
    """max_i of the Lipschitz constant of agent i's gradient."""
    H, _, _ = problem.stacked_arrays()
    eigs = np.linalg.eigvalsh(H)
    return float(2.0 * eigs[:, -1].max())


def default_alpha(problem: ProblemDCx) -> float:
    """Constant step 1 / (2 L) with L the worst-case gradient Lipschitz constant."""
    lip = gradient_lipschitz(problem)
    if lip <= 0:
        raise ValueError("all agent costs are linear; pick a step size by hand")
    return 1.0 / (2.0 * lip)


def dgp1_step(
    problem: ProblemDCx,
    schedule: WeightSchedule,
    state: ConsensusState,
    rule,
    ledger=None,
) -> ConsensusState:
    """One round of mixing, then a projected gradient step at the mixed point.

    The mixing weights may change with ``state.k``; the step size comes from
    ``rule(state.k)`` and is usually diminishing.
    """
    mixed = consensus_round(schedule, state.k, state.x, ledger)
    grads = agent_gradients(problem, mixed)
    alpha = rule(state.k)
    new_x = project_rows(problem.common_set, mixed - alpha * grads)
    return ConsensusState(new_x, state.k + 1)


def _edge_counts(gamma: np.ndarray, dim: int, tol: float = 1e-12) -> dict:
    counts = {}
    rows, cols = np.nonzero(gamma > tol)
    for i, j in zip(rows.tolist(), cols.tolist()):
        if i != j:
            counts[(i, j)] = dim
    return counts


def dgp2_step(
    problem: ProblemDCx,
    gamma: np.ndarray,
    state: ConsensusState,
    alpha: float,
    mu: int = 1,
    ledger=None,
    gamma_power=None,
) -> ConsensusState:
    """Gradient step at the local estimate, then ``mu`` rounds of mixing.

    Needs a constant weight matrix. Pass ``gamma_power`` (gamma ** mu,
    precomputed) when stepping in a loop; each call still bills ``mu`` rounds
    of messages on the base graph.
    """
    if mu < 1:
        raise ValueError("mu must be at least 1")
    gamma = np.asarray(gamma, dtype=float)
    if gamma_power is None:
        gamma_power = np.linalg.matrix_power(gamma, mu)
    stepped = state.x - alpha * agent_gradients(problem, state.x)
    new_x = project_rows(problem.common_set, gamma_power @ stepped)
    if ledger is not None:
        ledger.record_round(_edge_counts(gamma, problem.dim), repeat=mu)
    return ConsensusState(new_x, state.k + 1)


def incremental_cycle(
    problem: ProblemDCx,
    order,
    state: CycleState,
    rule,
    ledger=None,
) -> CycleState:
    """Pass one estimate around ``order``; each agent applies its own step.

    ``order`` must be a permutation of the agents. The step size is fixed for
    the whole cycle and comes from ``rule(state.k)`` with ``k`` counting
    completed cycles.
    """
    order = [int(i) for i in order]
    if sorted(order) != list(range(problem.n_agents)):
        raise ValueError("order must be a permutation of the agents")
    alpha = rule(state.k)
    z = state.z.copy()
    counts = {}
    for t, i in enumerate(order):
        grad = problem.costs[i].gradient(z)
        z = project(problem.common_set, z - alpha * grad)
        nxt = order[(t + 1) % len(order)]
        if nxt != i:
            counts[(nxt, i)] = problem.dim
    if ledger is not None:
        ledger.record_round(counts)
    return CycleState(z, state.k + 1)


def check_preconditions(problem: ProblemDCx, schedule: WeightSchedule, tau=None):
    """Warn (never raise) when convergence assumptions look violated.

    Returns the list of warning messages issued so callers can log them.
    """
    msgs = []
    if not schedule.doubly:
        msgs.append(
            "mixing weights are not doubly stochastic; agents may agree on a "
            "point that is not the network average"
        )
    horizon = tau if tau is not None else schedule.tau
    if horizon is not None and not check_joint_connectivity(schedule, horizon):
        msgs.append(
            f"graph sequence is not jointly connected over windows of {horizon}"
        )
    if not problem.common_set.is_bounded():
        msgs.append(
            "common set is unbounded, so gradients may grow without bound"
        )
    for m in msgs:
        warnings.warn(m, RuntimeWarning, stacklevel=2)
    return msgs
