"""Centralized reference solutions.

The oracle stacks every agent variable into one vector and hands the whole
QP to a monolithic interior-point solver (via cvxpy), then polishes the
answer with a direct KKT solve on the detected active set. It deliberately
shares no code with the distributed algorithms or the per-agent QP engines,
so the two paths can disagree when either is wrong.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problems import (
    Box,
    Point,
    Polyhedron,
    ProblemCCDC,
    ProblemDCCC,
    ProblemDCx,
    QuadCost,
)


class OracleInfeasible(RuntimeError):
    pass


class OracleUnbounded(RuntimeError):
    pass


@dataclass
class OracleSolution:
    point: Point
    objective: float
    multipliers: np.ndarray | None
    status: str

    @property
    def x(self) -> np.ndarray:
        return self.point.stacked()


def _set_rows(feasible_set, n, offset, dim):
    """Inequality and equality rows of one agent's set, lifted to the stack."""
    A_in, b_in = [], []
    A_eq, b_eq = [], []
    if isinstance(feasible_set, Box):
        eye = np.eye(dim)
        fin = np.isfinite(feasible_set.upper)
        if np.any(fin):
            R = np.zeros((int(fin.sum()), n))
            R[:, offset:offset + dim] = eye[fin]
            A_in.append(R)
            b_in.append(feasible_set.upper[fin])
        fin = np.isfinite(feasible_set.lower)
        if np.any(fin):
            R = np.zeros((int(fin.sum()), n))
            R[:, offset:offset + dim] = -eye[fin]
            A_in.append(R)
            b_in.append(-feasible_set.lower[fin])
    else:
        if feasible_set.A.shape[0]:
            R = np.zeros((feasible_set.A.shape[0], n))
            R[:, offset:offset + dim] = feasible_set.A
            A_in.append(R)
            b_in.append(feasible_set.b)
        if feasible_set.A_eq is not None:
            R = np.zeros((feasible_set.A_eq.shape[0], n))
            R[:, offset:offset + dim] = feasible_set.A_eq
            A_eq.append(R)
            b_eq.append(feasible_set.b_eq)
    return A_in, b_in, A_eq, b_eq


def _stacked_form(problem):
    """(H, q, const, A_in, b_in, A_eq, b_eq, n_coupling, dims) for any class."""
    if isinstance(problem, ProblemDCx):
        total = problem.total_cost()
        dims = [total.dim]
        H, q, const = total.H, total.q, total.c
        sets = [problem.common_set]
        E_rows, e_rhs = [], []
        n_coupling = 0
    elif isinstance(problem, ProblemDCCC):
        dims = problem.dims
        n = sum(dims)
        H = np.zeros((n, n))
        q = np.zeros(n)
        const = 0.0
        off = 0
        for c in problem.costs:
            H[off:off + c.dim, off:off + c.dim] = c.H
            q[off:off + c.dim] = c.q
            const += c.c
            off += c.dim
        sets = problem.local_sets
        E_rows = [np.hstack(problem.couplings)]
        e_rhs = [problem.rhs]
        n_coupling = problem.n_coupling
    elif isinstance(problem, ProblemCCDC):
        dims = problem.dims
        H = problem.assemble()
        q = problem.stacked_linear()
        const = problem.constant
        sets = problem.local_sets
        E_rows, e_rhs = [], []
        n_coupling = 0
    else:
        raise TypeError(f"unsupported problem type {type(problem)!r}")

    n = sum(dims)
    A_in, b_in = [], []
    A_eq, b_eq = list(E_rows), list(e_rhs)
    off = 0
    for s, d in zip(sets, dims):
        ai, bi, ae, be = _set_rows(s, n, off, d)
        A_in += ai
        b_in += bi
        A_eq += ae
        b_eq += be
        off += d
    A = np.vstack(A_in) if A_in else np.zeros((0, n))
    b = np.concatenate(b_in) if b_in else np.zeros(0)
    E = np.vstack(A_eq) if A_eq else np.zeros((0, n))
    e = np.concatenate(b_eq) if b_eq else np.zeros(0)
    return H, q, const, A, b, E, e, n_coupling, dims


def _psd_factor(H):
    w, V = np.linalg.eigh(H)
    w = np.clip(w, 0.0, None)
    return V * np.sqrt(w)


def _polish(H, q, A, b, E, e, x, tol):
    """Refine an approximate solution by solving the active-set KKT system.

    Returns (x, eq_multipliers, ok). Validation requires primal feasibility,
    nonnegative multipliers on the active rows and no objective increase.
    """
    n = x.size
    scale_b = 1.0 + np.abs(b).max(initial=0.0)
    x_cur = x.copy()
    y = np.zeros(E.shape[0])
    for _ in range(3):
        slack = b - A @ x_cur if A.shape[0] else np.zeros(0)
        act = slack <= 1e-6 * scale_b
        Aa = A[act]
        ka = Aa.shape[0]
        p = E.shape[0]
        K = np.zeros((n + p + ka, n + p + ka))
        K[:n, :n] = 2.0 * H
        K[:n, n:n + p] = E.T
        K[n:n + p, :n] = E
        K[:n, n + p:] = Aa.T
        K[n + p:, :n] = Aa
        rhs = np.concatenate([-q, e, b[act]])
        sol, *_ = np.linalg.lstsq(K, rhs, rcond=None)
        x_new = sol[:n]
        y = sol[n:n + p]
        z = sol[n + p:]
        feas_ok = True
        if A.shape[0]:
            feas_ok = np.max(A @ x_new - b, initial=0.0) <= 1e-9 * scale_b
        if E.shape[0]:
            feas_ok &= np.abs(E @ x_new - e).max(initial=0.0) <= 1e-8 * (
                1.0 + np.abs(e).max(initial=0.0)
            )
        duals_ok = z.min(initial=0.0) >= -1e-7
        obj_old = float(x @ H @ x + q @ x)
        obj_new = float(x_new @ H @ x_new + q @ x_new)
        if feas_ok and duals_ok and obj_new <= obj_old + 1e-9 * (1.0 + abs(obj_old)):
            new_act = (b - A @ x_new <= 1e-6 * scale_b) if A.shape[0] else act
            if np.array_equal(new_act, act):
                return x_new, y, True
            x_cur = x_new
        else:
            break
    return x, y, False


def solve_centralized(problem, tol: float = 1e-10) -> OracleSolution:
    """Solve the stacked problem to high accuracy.

    Returns the optimizer split back into per-agent blocks, the objective
    (constant offsets included) and, for linearly coupled problems, the
    multipliers of the coupling rows in the ``L = f + lam^T (Gx - g)``
    convention.
    """
    import cvxpy as cp

    H, q, const, A, b, E, e, n_coupling, dims = _stacked_form(problem)
    n = q.size
    x = cp.Variable(n)
    F = _psd_factor(H)
    obj = cp.sum_squares(F.T @ x) + q @ x
    cons = []
    if A.shape[0]:
        cons.append(A @ x <= b)
    if E.shape[0]:
        cons.append(E @ x == e)
    prob = cp.Problem(cp.Minimize(obj), cons)
    try:
        prob.solve(solver=cp.CLARABEL)
    except cp.error.SolverError:
        prob.solve(solver=cp.SCS, eps=1e-9, max_iters=100000)
    status = prob.status
    if status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
        raise OracleInfeasible("the stacked problem is infeasible")
    if status in (cp.UNBOUNDED, cp.UNBOUNDED_INACCURATE):
        raise OracleUnbounded("the stacked problem is unbounded")
    if x.value is None:
        raise RuntimeError(f"centralized solve failed with status {status}")
    x_hat = np.asarray(x.value, dtype=float)

    x_pol, y, ok = _polish(H, q, A, b, E, e, x_hat, tol)
    if not ok:
        x_pol = x_hat
        _, y, _ = _polish(H, q, A, b, E, e, x_hat, tol)

    off = np.concatenate([[0], np.cumsum(dims)])
    blocks = [x_pol[off[i]:off[i + 1]] for i in range(len(dims))]
    objective = float(x_pol @ H @ x_pol + q @ x_pol + const)
    multipliers = y[:n_coupling].copy() if n_coupling else None
    return OracleSolution(Point(blocks), objective, multipliers, "optimal")
