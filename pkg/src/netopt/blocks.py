"""Block-coordinate methods for coupled quadratic costs over decoupled sets.

Each agent owns one block of the variable and its own feasible set; coupling
lives only in the quadratic cost. Steps either minimize a block exactly given
the others (Jacobi, Gauss-Seidel, their damped and colored variants) or take
projected gradient steps on one block (randomized coordinate descent).
"""

from dataclasses import dataclass

import numpy as np

from .problems import ProblemCCDC, QuadCost, evaluate, partial_gradient, project
from .qp import solve_local_qp

__all__ = [
    "NonStrictBlock",
    "BlockState",
    "DirectionReport",
    "make_block_state",
    "block_argmin",
    "jacobi_step",
    "greedy_coloring",
    "gauss_seidel_step",
    "coord_descent_step",
    "cooperative_jacobi_step",
    "feasible_directions_step",
    "contraction_certificate",
]


class NonStrictBlock(ValueError):
    """A block has no quadratic curvature where the method requires some."""


@dataclass
class BlockState:
    """Per-agent blocks (ragged list of vectors) plus the iteration counter."""

    x: list
    k: int = 0

    def __post_init__(self):
        self.x = [np.asarray(b, dtype=float).ravel() for b in self.x]

    def copy_blocks(self) -> list:
        return [b.copy() for b in self.x]


@dataclass
class DirectionReport:
    """Why an agent kept its block during a feasible-directions pass."""

    agent: int
    reason: str
    slope: float


def make_block_state(problem: ProblemCCDC, x0=None) -> BlockState:
    if x0 is None:
        x0 = [s.interior_point() for s in problem.local_sets]
    return BlockState([np.asarray(b, dtype=float) for b in x0], 0)


def _shifted_linear(problem: ProblemCCDC, xs, i: int) -> np.ndarray:
    """Linear term of block i's cost once every other block is frozen."""
    q = problem.linear[i].copy()
    for j in range(problem.n_agents):
        if j == i:
            continue
        Hij = problem.blocks[i][j]
        if Hij is not None:
            q += 2.0 * (Hij @ xs[j])
    return q


def block_argmin(problem: ProblemCCDC, xs, i: int, tol: float = 1e-10) -> np.ndarray:
    """Exact minimizer of the cost in block i with the other blocks frozen."""
    cost = QuadCost(problem.block(i, i), _shifted_linear(problem, xs, i))
    sol = solve_local_qp(cost, problem.local_sets[i], tol=tol, x0=xs[i])
    return sol.x


def jacobi_step(problem: ProblemCCDC, state: BlockState, tol: float = 1e-10) -> BlockState:
    """Every agent minimizes its block against the previous iterate."""
    new = [block_argmin(problem, state.x, i, tol) for i in range(problem.n_agents)]
    return BlockState(new, state.k + 1)


def greedy_coloring(mask: np.ndarray) -> list:
    """Color classes of the block-interaction graph, greedily by index.

    Blocks in one class never interact, so they can be updated together.
    """
    mask = np.asarray(mask)
    M = mask.shape[0]
    color = np.full(M, -1, dtype=int)
    for i in range(M):
        taken = {
            color[j]
            for j in range(M)
            if j != i and color[j] >= 0 and (mask[i, j] or mask[j, i])
        }
        c = 0
        while c in taken:
            c += 1
        color[i] = c
    classes = [[] for _ in range(color.max() + 1)]
    for i in range(M):
        classes[color[i]].append(i)
    return classes


def gauss_seidel_step(
    problem: ProblemCCDC,
    state: BlockState,
    order=None,
    colors=None,
    tol: float = 1e-10,
) -> BlockState:
    """Minimize blocks one at a time against the freshest values.

    ``colors`` (from ``greedy_coloring``) groups mutually non-interacting
    blocks; members of a class read the same snapshot, which changes nothing
    relative to the flat sweep but marks what may run in parallel.
    """
    xs = state.copy_blocks()
    if colors is not None:
        for group in colors:
            snapshot = xs
            updates = {i: block_argmin(problem, snapshot, i, tol) for i in group}
            xs = list(xs)
            for i, xi in updates.items():
                xs[i] = xi
        return BlockState(xs, state.k + 1)
    if order is None:
        order = range(problem.n_agents)
    for i in order:
        xs[i] = block_argmin(problem, xs, i, tol)
    return BlockState(xs, state.k + 1)


def coord_descent_step(
    problem: ProblemCCDC, state: BlockState, rng: np.random.Generator
) -> BlockState:
    """Projected gradient step on one uniformly drawn block.

    The step is 1 / L_i with L_i the curvature bound of block i alone.
    """
    i = int(rng.integers(problem.n_agents))
    Hii = problem.block(i, i)
    lip = 2.0 * float(np.linalg.norm(Hii, 2))
    if lip <= 0:
        raise NonStrictBlock(f"block {i} has zero curvature")
    g = partial_gradient(problem, state.x, i)
    xs = state.copy_blocks()
    xs[i] = project(problem.local_sets[i], xs[i] - g / lip)
    return BlockState(xs, state.k + 1)


def cooperative_jacobi_step(
    problem: ProblemCCDC, state: BlockState, weights, tol: float = 1e-10
) -> BlockState:
    """Averaged Jacobi: block i moves a fraction ``weights[i]`` toward its
    argmin. Positive weights summing to one keep the iterate a convex
    combination of single-block updates, which converges without strict
    block curvature.
    """
    w = np.asarray(weights, dtype=float).ravel()
    if w.size != problem.n_agents:
        raise ValueError("one weight per agent required")
    if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-9:
        raise ValueError("weights must be positive and sum to one")
    new = []
    for i in range(problem.n_agents):
        best = block_argmin(problem, state.x, i, tol)
        new.append((1.0 - w[i]) * state.x[i] + w[i] * best)
    return BlockState(new, state.k + 1)


def feasible_directions_step(
    problem: ProblemCCDC,
    state: BlockState,
    armijo: float = 1e-4,
    max_halvings: int = 50,
    zero_tol: float = 1e-12,
    tol: float = 1e-10,
):
    """Sweep the agents; each moves along ``argmin - x`` with backtracking.

    Directions are tested on the exact quadratic decrease of the full cost.
    An agent whose direction has no negative slope (or whose backtracking
    exhausts ``max_halvings``) keeps its block; these are returned in the
    report list. Returns ``(new_state, reports)``.
    """
    xs = state.copy_blocks()
    reports = []
    for i in range(problem.n_agents):
        target = block_argmin(problem, xs, i, tol)
        d = target - xs[i]
        slope = float(partial_gradient(problem, xs, i) @ d)
        scale = 1.0 + abs(float(evaluate(problem, xs)[0]))
        if slope >= -zero_tol * scale:
            reports.append(DirectionReport(i, "zero_direction", slope))
            continue
        curv = float(d @ problem.block(i, i) @ d)
        s = 1.0
        for _ in range(max_halvings + 1):
            # exact change of the quadratic cost for a single-block move
            delta = s * slope + s * s * curv
            if delta <= armijo * s * slope:
                xs[i] = xs[i] + s * d
                break
            s *= 0.5
        else:
            reports.append(DirectionReport(i, "no_decrease", slope))
    return BlockState(xs, state.k + 1), reports


def contraction_certificate(problem: ProblemCCDC, beta: float, zeta=None):
    """Weighted block-norm bound for the damped gradient sweep map.

    Computes ``max_i (1/zeta_i) sum_j zeta_j ||(I - 2 beta H)_ij||_2``; a
    value below one certifies geometric convergence of simultaneous damped
    gradient updates with step ``beta``. Returns ``(certified, modulus)``.
    """
    M = problem.n_agents
    if zeta is None:
        zeta = np.ones(M)
    zeta = np.asarray(zeta, dtype=float).ravel()
    if zeta.size != M or np.any(zeta <= 0):
        raise ValueError("zeta must be positive, one entry per agent")
    dims = problem.dims
    modulus = 0.0
    for i in range(M):
        row = 0.0
        for j in range(M):
            blk = -2.0 * beta * problem.block(i, j)
            if i == j:
                blk = blk + np.eye(dims[i])
            row += zeta[j] * float(np.linalg.norm(blk, 2))
        modulus = max(modulus, row / zeta[i])
    return modulus < 1.0, modulus
