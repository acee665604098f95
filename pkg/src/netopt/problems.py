"""Problem containers for networked quadratic programs.

Three problem classes are supported, all built from per-agent quadratic
costs and convex feasible sets:

* :class:`ProblemDCx` -- decoupled costs, one shared decision variable.
* :class:`ProblemDCCC` -- per-agent costs and sets, linear coupling
  constraints ``sum_i G_i x^i = g``.
* :class:`ProblemCCDC` -- a single quadratic cost with cross-agent blocks,
  decoupled per-agent sets.

Conventions used everywhere in this package:

* objective of a :class:`QuadCost` is ``x^T H x + q^T x + c`` (no 1/2
  factor), so the gradient is ``2 H x + q``;
* agents are indexed from 0;
* equality multipliers follow ``L = f + lam^T (A x - b)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

SYM_TOL = 1e-12
PSD_TOL = 1e-10


class DimensionMismatch(ValueError):
    """Raised when matrix/vector shapes are inconsistent."""


class EmptySetError(ValueError):
    """Raised when a feasible set has no strictly interior certificate."""


def _matrix(a, name):
    m = np.asarray(a, dtype=float)
    if m.ndim != 2:
        raise DimensionMismatch(f"{name} must be a 2-d array, got ndim={m.ndim}")
    return m


def _vector(a, name):
    v = np.asarray(a, dtype=float)
    if v.ndim != 1:
        raise DimensionMismatch(f"{name} must be a 1-d array, got ndim={v.ndim}")
    return v


@dataclass
class QuadCost:
    """Quadratic cost ``x^T H x + q^T x + c`` with H symmetric PSD."""

    H: np.ndarray
    q: np.ndarray
    c: float = 0.0

    def __post_init__(self):
        self.H = _matrix(self.H, "H")
        self.q = _vector(self.q, "q")
        n = self.q.size
        if self.H.shape != (n, n):
            raise DimensionMismatch(
                f"H has shape {self.H.shape}, expected ({n}, {n})"
            )
        scale = max(1.0, float(np.abs(self.H).max(initial=0.0)))
        if np.abs(self.H - self.H.T).max(initial=0.0) > SYM_TOL * scale:
            raise ValueError("H must be symmetric")
        # tolerate tiny negative eigenvalues from floating point assembly
        w = np.linalg.eigvalsh(self.H) if n else np.zeros(0)
        if n and w.min() < -PSD_TOL * scale:
            raise ValueError(f"H must be positive semidefinite (min eig {w.min():.3e})")
        self.c = float(self.c)

    @property
    def dim(self) -> int:
        return self.q.size

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ self.H @ x + self.q @ x + self.c)

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return 2.0 * (self.H @ x) + self.q

    def min_eig(self) -> float:
        if self.dim == 0:
            return 0.0
        return float(np.linalg.eigvalsh(self.H).min())

    def shifted(self, s) -> "QuadCost":
        """Cost with an extra linear term ``s^T x``."""
        return QuadCost(self.H, self.q + np.asarray(s, dtype=float), self.c)


@dataclass
class Box:
    """Axis-aligned box ``lower <= x <= upper`` (entries may be infinite)."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.lower = _vector(self.lower, "lower")
        self.upper = _vector(self.upper, "upper")
        if self.lower.size != self.upper.size:
            raise DimensionMismatch("lower/upper length mismatch")
        if np.any(self.lower > self.upper):
            raise EmptySetError("box has lower > upper")

    @property
    def dim(self) -> int:
        return self.lower.size

    def contains(self, x, tol=1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def interior_point(self) -> np.ndarray:
        """A strictly interior point: box midpoint, or 0 pushed inward."""
        if np.any(self.lower >= self.upper):
            raise EmptySetError("box has empty interior")
        lo, up = self.lower, self.upper
        mid = np.zeros(self.dim)
        both = np.isfinite(lo) & np.isfinite(up)
        mid[both] = 0.5 * (lo[both] + up[both])
        only_lo = np.isfinite(lo) & ~np.isfinite(up)
        mid[only_lo] = lo[only_lo] + 1.0
        only_up = ~np.isfinite(lo) & np.isfinite(up)
        mid[only_up] = up[only_up] - 1.0
        return mid

    def coordinate_ranges(self) -> tuple[np.ndarray, np.ndarray]:
        return self.lower.copy(), self.upper.copy()

    def is_bounded(self) -> bool:
        return bool(np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper)))


@dataclass
class Polyhedron:
    """Polyhedron ``A x <= b`` with an optional equality pair ``A_eq x = b_eq``.

    A strictly interior point must be supplied at construction; it doubles
    as a nonemptiness certificate and as the starting point for barrier
    solves.
    """

    A: np.ndarray
    b: np.ndarray
    interior: np.ndarray
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    _ranges: tuple | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.A = _matrix(self.A, "A")
        self.b = _vector(self.b, "b")
        self.interior = _vector(self.interior, "interior")
        if self.A.shape[0] != self.b.size:
            raise DimensionMismatch("A/b row mismatch")
        if self.A.shape[1] != self.interior.size:
            raise DimensionMismatch("interior point has wrong dimension")
        if self.A_eq is not None:
            self.A_eq = _matrix(self.A_eq, "A_eq")
            self.b_eq = _vector(self.b_eq, "b_eq")
            if self.A_eq.shape != (self.b_eq.size, self.dim):
                raise DimensionMismatch("A_eq/b_eq shape mismatch")
        slack = self.b - self.A @ self.interior
        if self.A.shape[0] and slack.min() <= 0:
            raise EmptySetError(
                f"certificate point is not strictly interior (min slack {slack.min():.3e})"
            )
        if self.A_eq is not None:
            r = np.abs(self.A_eq @ self.interior - self.b_eq).max(initial=0.0)
            if r > 1e-8 * (1.0 + np.abs(self.b_eq).max(initial=0.0)):
                raise EmptySetError("certificate point violates the equality pair")

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    def contains(self, x, tol=1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        scale = 1.0 + np.abs(self.b).max(initial=0.0)
        ok = bool(np.all(self.A @ x <= self.b + tol * scale))
        if ok and self.A_eq is not None:
            ok = bool(np.abs(self.A_eq @ x - self.b_eq).max(initial=0.0) <= tol * scale)
        return ok

    def interior_point(self) -> np.ndarray:
        return self.interior.copy()

    def coordinate_ranges(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-coordinate min/max over the set, via 2n linear programs.

        Cached after the first call. Unattained directions come back infinite.
        """
        if self._ranges is None:
            from .qp import coordinate_range  # local import avoids a cycle

            lo = np.empty(self.dim)
            up = np.empty(self.dim)
            for j in range(self.dim):
                lo[j], up[j] = coordinate_range(self, j)
            self._ranges = (lo, up)
        return self._ranges[0].copy(), self._ranges[1].copy()

    def is_bounded(self) -> bool:
        lo, up = self.coordinate_ranges()
        return bool(np.all(np.isfinite(lo)) and np.all(np.isfinite(up)))


FeasibleSet = Box | Polyhedron


def project(feasible_set: FeasibleSet, v: np.ndarray) -> np.ndarray:
    """Euclidean projection of ``v`` onto the set.

    Boxes project by clamping; polyhedra solve the projection QP.
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (feasible_set.dim,):
        raise DimensionMismatch("point has wrong dimension for this set")
    if isinstance(feasible_set, Box):
        return np.clip(v, feasible_set.lower, feasible_set.upper)
    from .qp import solve_local_qp

    cost = QuadCost(np.eye(v.size), -2.0 * v)
    sol = solve_local_qp(cost, feasible_set, tol=1e-10)
    return sol.x


@dataclass(frozen=True)
class Point:
    """Per-agent decision blocks. DCx problems use a single shared block."""

    blocks: tuple[np.ndarray, ...]

    def __init__(self, blocks):
        object.__setattr__(
            self, "blocks", tuple(np.asarray(b, dtype=float) for b in blocks)
        )

    @classmethod
    def shared(cls, x) -> "Point":
        return cls([x])

    def stacked(self) -> np.ndarray:
        return np.concatenate([b for b in self.blocks]) if self.blocks else np.zeros(0)

    def __len__(self) -> int:
        return len(self.blocks)

    def __getitem__(self, i) -> np.ndarray:
        return self.blocks[i]


@dataclass
class ProblemDCx:
    """Sum of per-agent costs over one shared variable constrained to a set."""

    costs: list[QuadCost]
    common_set: FeasibleSet
    strict: bool = False

    def __post_init__(self):
        if not self.costs:
            raise ValueError("at least one agent cost is required")
        d = self.costs[0].dim
        for i, c in enumerate(self.costs):
            if c.dim != d:
                raise DimensionMismatch(f"cost {i} has dim {c.dim}, expected {d}")
        if self.common_set.dim != d:
            raise DimensionMismatch("common set dimension mismatch")
        if self.strict:
            for i, c in enumerate(self.costs):
                if c.min_eig() <= PSD_TOL:
                    raise ValueError(f"strict flag set but H_{i} is not positive definite")

    @property
    def n_agents(self) -> int:
        return len(self.costs)

    @property
    def dim(self) -> int:
        return self.costs[0].dim

    def total_cost(self) -> QuadCost:
        H = sum(c.H for c in self.costs)
        q = sum(c.q for c in self.costs)
        c0 = sum(c.c for c in self.costs)
        return QuadCost(H, q, c0)

    def stacked_arrays(self):
        """(M, d, d), (M, d), (M,) views of the agent costs, cached."""
        stack = getattr(self, "_stacked", None)
        if stack is None:
            stack = (
                np.stack([c.H for c in self.costs]),
                np.stack([c.q for c in self.costs]),
                np.array([c.c for c in self.costs]),
            )
            object.__setattr__(self, "_stacked", stack)
        return stack


@dataclass
class RowBlock:
    """A block of coupling rows handled by one agent.

    ``rows`` indexes into the stacked coupling constraint; ``neighbors``
    lists every agent whose variable appears in those rows (the owner
    included).
    """

    owner: int
    rows: np.ndarray
    neighbors: tuple[int, ...]

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=int)
        self.neighbors = tuple(sorted(set(int(j) for j in self.neighbors)))


@dataclass
class ProblemDCCC:
    """Per-agent costs/sets with linear coupling ``sum_i G_i x^i = g``."""

    costs: list[QuadCost]
    local_sets: list[FeasibleSet]
    couplings: list[np.ndarray]
    rhs: np.ndarray
    row_blocks: list[RowBlock] | None = None

    def __post_init__(self):
        M = len(self.costs)
        if len(self.local_sets) != M or len(self.couplings) != M:
            raise DimensionMismatch("costs/local_sets/couplings length mismatch")
        self.rhs = _vector(self.rhs, "rhs")
        n_lam = self.rhs.size
        self.couplings = [_matrix(G, f"G_{i}") for i, G in enumerate(self.couplings)]
        for i, (cost, s, G) in enumerate(
            zip(self.costs, self.local_sets, self.couplings)
        ):
            if s.dim != cost.dim:
                raise DimensionMismatch(f"agent {i}: set/cost dimension mismatch")
            if G.shape != (n_lam, cost.dim):
                raise DimensionMismatch(
                    f"agent {i}: G has shape {G.shape}, expected ({n_lam}, {cost.dim})"
                )
        if self.row_blocks is not None:
            self._check_row_blocks()

    def _check_row_blocks(self):
        n_lam = self.rhs.size
        seen = np.zeros(n_lam, dtype=bool)
        for blk in self.row_blocks:
            if np.any(seen[blk.rows]):
                raise ValueError("row blocks overlap")
            seen[blk.rows] = True
            for j in range(self.n_agents):
                if j in blk.neighbors:
                    continue
                sub = self.couplings[j][blk.rows, :]
                if sub.size and np.any(sub != 0.0):
                    raise ValueError(
                        f"row block of agent {blk.owner} touches non-neighbor {j}"
                    )
        if not np.all(seen):
            raise ValueError("row blocks do not partition the coupling rows")

    @property
    def n_agents(self) -> int:
        return len(self.costs)

    @property
    def n_coupling(self) -> int:
        return self.rhs.size

    @property
    def dims(self) -> list[int]:
        return [c.dim for c in self.costs]

    def coupling_residual(self, blocks: Sequence[np.ndarray]) -> np.ndarray:
        r = -self.rhs.copy()
        for G, x in zip(self.couplings, blocks):
            r = r + G @ np.asarray(x, dtype=float)
        return r

    def stacked_coupling(self) -> np.ndarray:
        return np.hstack(self.couplings)


@dataclass
class ProblemCCDC:
    """One coupled quadratic cost over decoupled per-agent sets.

    ``blocks[i][j]`` holds H_ij (None for a structural zero); the assembled
    matrix must be symmetric PSD. The block-sparsity mask is recorded at
    construction and later assembly is checked against it.
    """

    blocks: list[list[np.ndarray | None]]
    linear: list[np.ndarray]
    local_sets: list[FeasibleSet]
    constant: float = 0.0
    mask: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        M = len(self.linear)
        if len(self.blocks) != M or any(len(row) != M for row in self.blocks):
            raise DimensionMismatch("blocks must be an MxM grid")
        if len(self.local_sets) != M:
            raise DimensionMismatch("local_sets length mismatch")
        self.linear = [_vector(qi, f"q_{i}") for i, qi in enumerate(self.linear)]
        dims = [qi.size for qi in self.linear]
        for i in range(M):
            if self.local_sets[i].dim != dims[i]:
                raise DimensionMismatch(f"agent {i}: set dimension mismatch")
            for j in range(M):
                Hij = self.blocks[i][j]
                if Hij is None:
                    continue
                Hij = _matrix(Hij, f"H_{i}{j}")
                if Hij.shape != (dims[i], dims[j]):
                    raise DimensionMismatch(f"H_{i}{j} has wrong shape")
                self.blocks[i][j] = Hij
        scale = 1.0
        for i in range(M):
            for j in range(M):
                Hij, Hji = self.blocks[i][j], self.blocks[j][i]
                if (Hij is None) != (Hji is None):
                    raise ValueError(f"blocks ({i},{j}) and ({j},{i}) disagree on structure")
                if Hij is not None:
                    scale = max(scale, float(np.abs(Hij).max(initial=0.0)))
                    if np.abs(Hij - Hji.T).max(initial=0.0) > 1e-10 * scale:
                        raise ValueError(f"H_{i}{j} != H_{j}{i}^T")
        mask = np.array(
            [
                [
                    self.blocks[i][j] is not None and np.any(self.blocks[i][j] != 0.0)
                    for j in range(M)
                ]
                for i in range(M)
            ],
            dtype=bool,
        )
        if self.mask is None:
            self.mask = mask
        else:
            self.mask = np.asarray(self.mask, dtype=bool)
            if np.any(mask & ~self.mask):
                raise ValueError("nonzero block outside the declared sparsity mask")
        H = self.assemble()
        if H.size:
            w = np.linalg.eigvalsh(H)
            if w.min() < -PSD_TOL * max(1.0, scale):
                raise ValueError(
                    f"assembled Hessian is not PSD (min eig {w.min():.3e})"
                )
        self.constant = float(self.constant)

    @property
    def n_agents(self) -> int:
        return len(self.linear)

    @property
    def dims(self) -> list[int]:
        return [qi.size for qi in self.linear]

    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.dims)])

    def assemble(self) -> np.ndarray:
        """Dense stacked H; structural zeros become exact zero blocks."""
        dims = self.dims
        off = self.offsets()
        n = off[-1]
        H = np.zeros((n, n))
        for i in range(self.n_agents):
            for j in range(self.n_agents):
                Hij = self.blocks[i][j]
                if Hij is not None:
                    H[off[i]:off[i + 1], off[j]:off[j + 1]] = Hij
        return H

    def stacked_linear(self) -> np.ndarray:
        return np.concatenate(self.linear)

    def block(self, i, j) -> np.ndarray:
        Hij = self.blocks[i][j]
        if Hij is None:
            return np.zeros((self.dims[i], self.dims[j]))
        return Hij


Problem = ProblemDCx | ProblemDCCC | ProblemCCDC


def _point_blocks(problem, point) -> list[np.ndarray]:
    if isinstance(point, Point):
        blocks = list(point.blocks)
    elif isinstance(point, np.ndarray) and isinstance(problem, ProblemDCx):
        blocks = [point]
    else:
        blocks = [np.asarray(b, dtype=float) for b in point]
    return blocks


def evaluate(problem: Problem, point) -> tuple[float, np.ndarray]:
    """Objective value and coupling residual (empty where no coupling exists)."""
    blocks = _point_blocks(problem, point)
    if isinstance(problem, ProblemDCx):
        if len(blocks) != 1:
            raise DimensionMismatch("DCx problems take a single shared block")
        x = blocks[0]
        obj = sum(c.value(x) for c in problem.costs)
        return float(obj), np.zeros(0)
    if isinstance(problem, ProblemDCCC):
        if len(blocks) != problem.n_agents:
            raise DimensionMismatch("one block per agent required")
        obj = sum(c.value(x) for c, x in zip(problem.costs, blocks))
        return float(obj), problem.coupling_residual(blocks)
    if isinstance(problem, ProblemCCDC):
        if len(blocks) != problem.n_agents:
            raise DimensionMismatch("one block per agent required")
        obj = problem.constant
        for i in range(problem.n_agents):
            obj += float(problem.linear[i] @ blocks[i])
            for j in range(problem.n_agents):
                Hij = problem.blocks[i][j]
                if Hij is not None:
                    obj += float(blocks[i] @ Hij @ blocks[j])
        return float(obj), np.zeros(0)
    raise TypeError(f"unsupported problem type {type(problem)!r}")


def partial_gradient(problem: ProblemCCDC, point, i: int) -> np.ndarray:
    """Gradient of the coupled cost w.r.t. block i: ``2 sum_j H_ij x^j + q_i``."""
    if not isinstance(problem, ProblemCCDC):
        raise TypeError("partial_gradient is defined for coupled-cost problems")
    blocks = _point_blocks(problem, point)
    g = problem.linear[i].copy()
    for j in range(problem.n_agents):
        Hij = problem.blocks[i][j]
        if Hij is not None:
            g += 2.0 * (Hij @ blocks[j])
    return g
