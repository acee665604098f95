"""Dense solvers for the per-agent quadratic subproblems.

Two engines sit behind :func:`solve_local_qp`:

* boxes use active-set clamping (a primal-dual active set iteration) with a
  Schur-complement solve for any equality rows;
* polyhedra use an infeasible-start Mehrotra predictor-corrector
  interior-point method.

Multipliers follow ``L = f + lam^T (A_e x - b_e)``, so stationarity reads
``2 H x + q + A_e^T lam + (active inequality terms) = 0``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .problems import Box, EmptySetError, FeasibleSet, Polyhedron, QuadCost

OPTIMAL = "optimal"
MAX_ITER = "max_iter"
INFEASIBLE = "infeasible"

PROX_QUADRATIC = "quadratic"
PROX_LOGBARRIER = "logbarrier"


class _IpmBreakdown(Exception):
    """Internal: interior-point linear algebra produced non-finite steps."""


class NotStronglyConvex(ValueError):
    """Smoothed solve with mu=0, a merely PSD cost and an unbounded set."""


@dataclass
class QPSolution:
    x: np.ndarray
    eq_multipliers: np.ndarray
    status: str
    kkt_residual: float
    ineq_multipliers: np.ndarray | None = None
    lower_multipliers: np.ndarray | None = None
    upper_multipliers: np.ndarray | None = None
    iterations: int = 0


def _solve_kkt(K, rhs):
    """Solve a dense KKT system with one step of iterative refinement.

    Singular systems (active sets can momentarily over-determine the step)
    fall back to least squares rather than failing.
    """
    with warnings.catch_warnings(), np.errstate(invalid="ignore", over="ignore"):
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        try:
            lu = sla.lu_factor(K)
            sol = sla.lu_solve(lu, rhs)
            sol = sol - sla.lu_solve(lu, K @ sol - rhs)
            if not np.all(np.isfinite(sol)):
                raise np.linalg.LinAlgError
            return sol
        except (np.linalg.LinAlgError, ValueError):
            sol, *_ = np.linalg.lstsq(K, rhs, rcond=None)
            return sol


def _equality_qp(Q, q, C, d):
    """Directly solve min x^T(Q/2)x + q^T x s.t. C x = d (Q is the Hessian)."""
    n = q.size
    p = C.shape[0]
    K = np.zeros((n + p, n + p))
    K[:n, :n] = Q
    K[:n, n:] = C.T
    K[n:, :n] = C
    rhs = np.concatenate([-q, d])
    sol = _solve_kkt(K, rhs)
    return sol[:n], sol[n:]


def _max_step(v, dv, cap=1.0):
    """Largest alpha <= cap with v + alpha*dv >= 0 (v > 0 assumed)."""
    neg = dv < 0
    if not np.any(neg):
        return cap
    return min(cap, float(np.min(-v[neg] / dv[neg])))


def _ipm(Q, q, A, b, C, d, tol, x0=None, max_iter=120):
    """Mehrotra predictor-corrector for min x^T(Q/2)x + q^T x,
    A x <= b, C x = d. Returns (x, y, z, status, kkt_residual, iters)."""
    n = q.size
    m = A.shape[0]
    p = C.shape[0]
    if m == 0:
        if p == 0:
            x, _ = _equality_qp(Q, q, np.zeros((0, n)), np.zeros(0))
            r = np.abs(Q @ x + q).max(initial=0.0)
            ok = r <= max(tol, 1e-9) * (1.0 + np.abs(q).max(initial=0.0))
            return x, np.zeros(0), np.zeros(0), OPTIMAL if ok else MAX_ITER, r, 1
        x, y = _equality_qp(Q, q, C, d)
        r_e = np.abs(C @ x - d).max(initial=0.0)
        r_d = np.abs(Q @ x + q + C.T @ y).max(initial=0.0)
        res = max(r_e, r_d)
        scale = 1.0 + max(np.abs(q).max(initial=0.0), np.abs(d).max(initial=0.0))
        ok = res <= max(tol, 1e-9) * scale
        return x, y, np.zeros(0), OPTIMAL if ok else MAX_ITER, res, 1

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    s = b - A @ x
    s = np.where(s > 1e-3, s, 1.0)
    z = np.ones(m)
    y = np.zeros(p)

    sd = 1.0 + np.abs(q).max(initial=0.0)
    sp = 1.0 + np.abs(b).max(initial=0.0)
    se = 1.0 + np.abs(d).max(initial=0.0) if p else 1.0

    status = MAX_ITER
    it = 0
    for it in range(1, max_iter + 1):
        r_d = Q @ x + q + A.T @ z + (C.T @ y if p else 0.0)
        r_p = A @ x + s - b
        r_e = C @ x - d if p else np.zeros(0)
        mu = float(s @ z) / m
        obj_scale = 1.0 + abs(float(x @ (Q @ x) * 0.5 + q @ x))
        res = max(
            np.abs(r_d).max(initial=0.0) / sd,
            np.abs(r_p).max(initial=0.0) / sp,
            np.abs(r_e).max(initial=0.0) / se,
        )
        if res <= tol and mu <= tol * obj_scale:
            status = OPTIMAL
            break

        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            zs = z / s
            W = Q + (A.T * zs) @ A
        K = np.zeros((n + p, n + p))
        K[:n, :n] = W
        if p:
            K[:n, n:] = C.T
            K[n:, :n] = C
        if not np.isfinite(K).all():
            break
        with warnings.catch_warnings():
            # zero pivots surface as non-finite Newton steps and are handled
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            try:
                lu = sla.lu_factor(K)
            except (np.linalg.LinAlgError, ValueError):
                K[:n, :n] += 1e-12 * np.eye(n)
                lu = sla.lu_factor(K)

        def newton(rc):
            with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                t = (-rc + z * r_p) / s
                rhs = np.concatenate([-r_d - A.T @ t, -r_e])
            if not np.isfinite(rhs).all():
                raise _IpmBreakdown
            with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                sol = sla.lu_solve(lu, rhs)
                sol = sol - sla.lu_solve(lu, K @ sol - rhs)
                dx = sol[:n]
                dy = sol[n:]
                ds = -r_p - A @ dx
                dz = (-rc - z * ds) / s
            if not (np.isfinite(dx).all() and np.isfinite(dz).all()):
                raise _IpmBreakdown
            return dx, dy, ds, dz

        # predictor; degenerate subproblems (e.g. feasible only on the set's
        # boundary) blow the slacks up, which is a breakdown, not a crash
        try:
            with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                dx_a, dy_a, ds_a, dz_a = newton(z * s)
                ap = _max_step(s, ds_a)
                ad = _max_step(z, dz_a)
                mu_aff = float((s + ap * ds_a) @ (z + ad * dz_a)) / m
                sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.1
                sigma = min(max(sigma, 1e-8), 0.9)
                # corrector
                dx, dy, ds, dz = newton(z * s + ds_a * dz_a - sigma * mu)
            if not np.isfinite(sigma):
                break
        except (_IpmBreakdown, ValueError):
            break
        frac = max(0.99, 1.0 - 10.0 * mu)
        ap = frac * _max_step(s, ds, cap=1.0 / frac)
        ad = frac * _max_step(z, dz, cap=1.0 / frac)
        ap, ad = min(ap, 1.0), min(ad, 1.0)
        x = x + ap * dx
        s = s + ap * ds
        y = y + ad * dy
        z = z + ad * dz

    viol = np.maximum(A @ x - b, 0.0).max(initial=0.0)
    r_d = np.abs(Q @ x + q + A.T @ z + (C.T @ y if p else 0.0)).max(initial=0.0)
    r_e = np.abs(C @ x - d).max(initial=0.0) if p else 0.0
    comp = np.abs(z * (b - A @ x)).max(initial=0.0)
    kkt = max(viol, r_d, r_e, comp)
    return x, y, z, status, kkt, it


def _pdas_box(Q, q, lower, upper, C, d, tol, max_iter=100):
    """Primal-dual active-set clamping for box QPs with equality rows.

    Returns (x, y, nu_l, nu_u, converged, iters); caller falls back to the
    interior-point engine when the active sets cycle.
    """
    n = q.size
    p = C.shape[0]
    au = np.zeros(n, dtype=bool)
    al = np.zeros(n, dtype=bool)
    nu_u = np.zeros(n)
    nu_l = np.zeros(n)
    x = np.zeros(n)
    seen = set()
    for it in range(1, max_iter + 1):
        key = (au.tobytes(), al.tobytes())
        cycling = key in seen
        seen.add(key)
        active = au | al
        free = ~active
        x = np.where(au, upper, np.where(al, lower, 0.0))
        nf = int(free.sum())
        K = np.zeros((nf + p, nf + p))
        K[:nf, :nf] = Q[np.ix_(free, free)]
        rhs = np.empty(nf + p)
        rhs[:nf] = -q[free] - Q[np.ix_(free, active)] @ x[active]
        if p:
            K[:nf, nf:] = C[:, free].T
            K[nf:, :nf] = C[:, free]
            rhs[nf:] = d - C[:, active] @ x[active]
        sol = _solve_kkt(K, rhs)
        x[free] = sol[:nf]
        y = sol[nf:]
        g = Q @ x + q + (C.T @ y if p else 0.0)
        nu_u = np.where(au, -g, 0.0)
        nu_l = np.where(al, g, 0.0)
        with np.errstate(invalid="ignore"):
            au_new = (nu_u + (x - upper)) > 0
            al_new = (nu_l + (lower - x)) > 0
        both = au_new & al_new
        if np.any(both):  # can only happen on near-degenerate bounds
            au_new[both] = g[both] < 0
            al_new[both] = ~au_new[both]
        if np.array_equal(au_new, au) and np.array_equal(al_new, al):
            return x, y, nu_l, nu_u, True, it
        if cycling:
            return x, y, nu_l, nu_u, False, it
        au, al = au_new, al_new
    return x, y, nu_l, nu_u, False, max_iter


def _box_kkt_residual(Q, q, lower, upper, C, d, x, y, nu_l, nu_u):
    stat = Q @ x + q + nu_u - nu_l + (C.T @ y if C.shape[0] else 0.0)
    viol = max(
        np.maximum(lower - x, 0.0).max(initial=0.0),
        np.maximum(x - upper, 0.0).max(initial=0.0),
    )
    r_e = np.abs(C @ x - d).max(initial=0.0) if C.shape[0] else 0.0
    with np.errstate(invalid="ignore"):
        comp_u = np.where(np.isfinite(upper), nu_u * (upper - x), 0.0)
        comp_l = np.where(np.isfinite(lower), nu_l * (x - lower), 0.0)
    comp = max(
        np.abs(comp_u).max(initial=0.0),
        np.abs(comp_l).max(initial=0.0),
        np.maximum(-nu_u, 0.0).max(initial=0.0),
        np.maximum(-nu_l, 0.0).max(initial=0.0),
    )
    return max(np.abs(stat).max(initial=0.0), viol, r_e, comp)


def _box_to_rows(box: Box):
    """Finite bound rows of a box as A x <= b."""
    n = box.dim
    eye = np.eye(n)
    rows = []
    rhs = []
    fin_u = np.isfinite(box.upper)
    fin_l = np.isfinite(box.lower)
    if np.any(fin_u):
        rows.append(eye[fin_u])
        rhs.append(box.upper[fin_u])
    if np.any(fin_l):
        rows.append(-eye[fin_l])
        rhs.append(-box.lower[fin_l])
    if rows:
        return np.vstack(rows), np.concatenate(rhs)
    return np.zeros((0, n)), np.zeros(0)


def _feasibility_gap(feasible_set, C, d, tol):
    """Phase-1 check: min ||Cx - d||^2 over the set; True when infeasible."""
    H1 = QuadCost(C.T @ C, -2.0 * C.T @ d, float(d @ d))
    sol = solve_local_qp(H1, feasible_set, tol=max(tol, 1e-12))
    gap = float(np.linalg.norm(C @ sol.x - d))
    ftol = 1e-7 * (1.0 + np.abs(d).max(initial=0.0))
    return gap > ftol, gap


def solve_local_qp(
    cost: QuadCost,
    feasible_set: FeasibleSet,
    eq: tuple[np.ndarray, np.ndarray] | None = None,
    tol: float = 1e-10,
    x0: np.ndarray | None = None,
) -> QPSolution:
    """Minimize ``x^T H x + q^T x`` over the set, plus optional extra
    equality rows ``A_e x = b_e`` whose multipliers are returned.

    Parameters
    ----------
    cost : QuadCost
        PSD quadratic cost.
    feasible_set : Box or Polyhedron
    eq : (A_e, b_e) or None
        Extra equality rows; ``eq_multipliers`` aligns with these rows.
    tol : float
        Target KKT residual (default 1e-10).
    x0 : array or None
        Warm start for the interior-point path.
    """
    n = cost.dim
    if feasible_set.dim != n:
        raise ValueError("set/cost dimension mismatch")
    Q = 2.0 * cost.H
    q = cost.q
    if eq is not None:
        A_e = np.atleast_2d(np.asarray(eq[0], dtype=float))
        b_e = np.atleast_1d(np.asarray(eq[1], dtype=float))
    else:
        A_e = np.zeros((0, n))
        b_e = np.zeros(0)
    p_user = A_e.shape[0]

    if isinstance(feasible_set, Box):
        sol = _solve_box(Q, q, feasible_set, A_e, b_e, tol, x0)
    else:
        sol = _solve_polyhedron(Q, q, feasible_set, A_e, b_e, tol, x0)

    if sol.status != OPTIMAL and (p_user or isinstance(feasible_set, Polyhedron)):
        C_all = A_e
        d_all = b_e
        if isinstance(feasible_set, Polyhedron) and feasible_set.A_eq is not None:
            C_all = np.vstack([C_all, feasible_set.A_eq])
            d_all = np.concatenate([d_all, feasible_set.b_eq])
        if C_all.shape[0]:
            bad, _ = _feasibility_gap(_strip_eq(feasible_set), C_all, d_all, tol)
            if bad:
                sol.status = INFEASIBLE
    return sol


def _strip_eq(feasible_set):
    """The same set without its equality pair (used by phase-1)."""
    if isinstance(feasible_set, Polyhedron) and feasible_set.A_eq is not None:
        return Polyhedron(feasible_set.A, feasible_set.b, feasible_set.interior)
    return feasible_set


def _solve_box(Q, q, box, A_e, b_e, tol, x0):
    lower, upper = box.lower, box.upper
    fixed = lower == upper
    if np.any(fixed):
        # substitute the pinned coordinates and solve the reduced problem
        free = ~fixed
        xf = lower[fixed]
        Qr = Q[np.ix_(free, free)]
        qr = q[free] + Q[np.ix_(free, fixed)] @ xf
        Cr = A_e[:, free]
        dr = b_e - A_e[:, fixed] @ xf
        sub = Box(lower[free], upper[free])
        solr = _solve_box(Qr, qr, sub, Cr, dr, tol, None)
        x = np.empty(q.size)
        x[fixed] = xf
        x[free] = solr.x
        solr.x = x
        return solr

    x, y, nu_l, nu_u, ok, it = _pdas_box(Q, q, lower, upper, A_e, b_e, tol)
    if ok:
        kkt = _box_kkt_residual(Q, q, lower, upper, A_e, b_e, x, y, nu_l, nu_u)
        if kkt <= max(tol, 1e-8) * (1.0 + np.abs(q).max(initial=0.0)):
            return QPSolution(x, y, OPTIMAL, kkt, None, nu_l, nu_u, it)
    # fall back to the interior-point engine on the finite bound rows
    A, b = _box_to_rows(box)
    x0 = box.interior_point() if x0 is None else x0
    x, y_all, z, status, kkt, it2 = _ipm(Q, q, A, b, A_e, b_e, tol, x0)
    nu = _split_box_multipliers(box, z)
    return QPSolution(x, y_all, status, kkt, z, nu[0], nu[1], it + it2)


def _split_box_multipliers(box, z):
    n = box.dim
    nu_u = np.zeros(n)
    nu_l = np.zeros(n)
    fin_u = np.isfinite(box.upper)
    fin_l = np.isfinite(box.lower)
    k = int(fin_u.sum())
    if z.size:
        nu_u[fin_u] = z[:k]
        nu_l[fin_l] = z[k:]
    return nu_l, nu_u


def _solve_polyhedron(Q, q, poly, A_e, b_e, tol, x0):
    C = A_e
    d = b_e
    p_user = A_e.shape[0]
    if poly.A_eq is not None:
        C = np.vstack([A_e, poly.A_eq])
        d = np.concatenate([b_e, poly.b_eq])
    start = poly.interior_point() if x0 is None else np.asarray(x0, dtype=float)
    x, y, z, status, kkt, it = _ipm(Q, q, poly.A, poly.b, C, d, tol, start)
    return QPSolution(x, y[:p_user], status, kkt, z, iterations=it)


def coordinate_range(poly: Polyhedron, j: int) -> tuple[float, float]:
    """Min and max of coordinate j over a polyhedron (LP probes)."""
    n = poly.dim
    out = []
    for sign in (1.0, -1.0):
        q = np.zeros(n)
        q[j] = sign
        C = poly.A_eq if poly.A_eq is not None else np.zeros((0, n))
        d = poly.b_eq if poly.A_eq is not None else np.zeros(0)
        x, _, _, status, _, _ = _ipm(
            np.zeros((n, n)), q, poly.A, poly.b, C, d, 1e-9, poly.interior_point()
        )
        big = 1e9 * (1.0 + np.abs(poly.interior).max(initial=0.0))
        if status != OPTIMAL and abs(x[j]) > big:
            out.append(-np.inf if sign > 0 else np.inf)
        elif status != OPTIMAL:
            # conservatively treat a stalled probe as unbounded
            out.append(-np.inf if sign > 0 else np.inf)
        else:
            out.append(float(x[j]))
    return out[0], -(-out[1])


def _barrier_parts(feasible_set, x):
    """(value, gradient, hessian) of the log barrier at a strictly interior x."""
    if isinstance(feasible_set, Box):
        lo, up = feasible_set.lower, feasible_set.upper
        gu = np.zeros(x.size)
        gl = np.zeros(x.size)
        hu = np.zeros(x.size)
        hl = np.zeros(x.size)
        val = 0.0
        fin = np.isfinite(up)
        su = up[fin] - x[fin]
        if np.any(su <= 0):
            return np.inf, None, None
        val -= np.log(su).sum()
        gu[fin] = 1.0 / su
        hu[fin] = 1.0 / su**2
        fin = np.isfinite(lo)
        sl = x[fin] - lo[fin]
        if np.any(sl <= 0):
            return np.inf, None, None
        val -= np.log(sl).sum()
        gl[fin] = 1.0 / sl
        hl[fin] = 1.0 / sl**2
        return val, gu - gl, np.diag(hu + hl)
    s = feasible_set.b - feasible_set.A @ x
    if np.any(s <= 0):
        return np.inf, None, None
    w = 1.0 / s
    val = -np.log(s).sum()
    grad = feasible_set.A.T @ w
    hess = (feasible_set.A.T * w**2) @ feasible_set.A
    return float(val), grad, hess


def barrier_complexity(feasible_set) -> int:
    """Number of log terms in the set's barrier (its self-concordance parameter)."""
    if isinstance(feasible_set, Box):
        return int(np.isfinite(feasible_set.lower).sum() + np.isfinite(feasible_set.upper).sum())
    return feasible_set.A.shape[0]


def smoothed_hessian(cost: QuadCost, feasible_set, x, mu, prox=PROX_LOGBARRIER):
    """Hessian of ``f + mu * prox`` at x (x strictly interior for barriers)."""
    if prox == PROX_QUADRATIC:
        return 2.0 * cost.H + mu * np.eye(cost.dim)
    _, _, hess = _barrier_parts(feasible_set, np.asarray(x, dtype=float))
    if hess is None:
        raise ValueError("point is not strictly interior")
    return 2.0 * cost.H + mu * hess


def _barrier_max_step(feasible_set, x, dx):
    """Largest alpha keeping x + alpha dx weakly inside (capped at 1)."""
    if isinstance(feasible_set, Box):
        lo, up = feasible_set.lower, feasible_set.upper
        amax = 1.0
        pos = dx > 0
        if np.any(pos & np.isfinite(up)):
            sel = pos & np.isfinite(up)
            amax = min(amax, float(np.min((up[sel] - x[sel]) / dx[sel])))
        neg = dx < 0
        if np.any(neg & np.isfinite(lo)):
            sel = neg & np.isfinite(lo)
            amax = min(amax, float(np.min((lo[sel] - x[sel]) / dx[sel])))
        return amax
    step = feasible_set.A @ dx
    slack = feasible_set.b - feasible_set.A @ x
    pos = step > 0
    return min(1.0, float(np.min(slack[pos] / step[pos]))) if np.any(pos) else 1.0


def _newton_barrier(cost, feasible_set, shift, mu, tol, x0, max_iter=100):
    x = np.asarray(x0, dtype=float).copy()
    A_eq = getattr(feasible_set, "A_eq", None)
    p = A_eq.shape[0] if A_eq is not None else 0
    n = x.size

    def phi(v):
        bval, _, _ = _barrier_parts(feasible_set, v)
        if not np.isfinite(bval):
            return np.inf
        return cost.value(v) + float(shift @ v) + mu * bval

    val = phi(x)
    polish = 0
    for _ in range(max_iter):
        bval, bgrad, bhess = _barrier_parts(feasible_set, x)
        grad = cost.gradient(x) + shift + mu * bgrad
        hess = 2.0 * cost.H + mu * bhess
        if p:
            K = np.zeros((n + p, n + p))
            K[:n, :n] = hess
            K[:n, n:] = A_eq.T
            K[n:, :n] = A_eq
            rhs = np.concatenate([-grad, np.zeros(p)])
            sol = _solve_kkt(K, rhs)
            dx = sol[:n]
        else:
            dx = _solve_kkt(hess, -grad)
        dec = float(-grad @ dx)
        if dec / 2.0 <= max(tol, 1e-13) * (1.0 + abs(val)):
            # inside the quadratic basin each damped step squares the
            # remaining error; two polish passes reach the float floor.
            # phi cannot resolve sub-ulp progress here, so accept on
            # interiority alone.
            if polish >= 2 or dec <= 0:
                break
            alpha = min(1.0, 0.99 * _barrier_max_step(feasible_set, x, dx))
            cand = x + alpha * dx
            cval = phi(cand)
            if np.isfinite(cval):
                x = cand
                val = cval
                polish += 1
                continue
            break
        polish = 0
        # keep strictly inside, then backtrack on the objective
        alpha = min(1.0, 0.99 * _barrier_max_step(feasible_set, x, dx))
        for _ in range(60):
            cand = x + alpha * dx
            cval = phi(cand)
            if cval <= val - 1e-4 * alpha * dec:
                break
            alpha *= 0.5
        else:
            break
        x = cand
        val = cval
    return x


def solve_smoothed(
    cost: QuadCost,
    feasible_set: FeasibleSet,
    shift: np.ndarray,
    mu: float,
    prox: str = PROX_QUADRATIC,
    tol: float = 1e-10,
    x0: np.ndarray | None = None,
    center: np.ndarray | None = None,
) -> np.ndarray:
    """Minimize ``f(x) + mu * P(x) + shift^T x`` over the set.

    ``P`` is either the quadratic prox ``0.5 ||x - center||^2`` (center
    defaults to the set's interior point) or the set's log barrier. The
    barrier path returns a strictly interior point for every mu > 0.
    """
    shift = np.asarray(shift, dtype=float)
    if shift.shape != (cost.dim,):
        raise ValueError("shift has wrong dimension")
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    if prox == PROX_QUADRATIC:
        if mu == 0.0:
            if cost.min_eig() <= 1e-12 and not feasible_set.is_bounded():
                raise NotStronglyConvex(
                    "mu=0 with a merely PSD cost over an unbounded set"
                )
            return solve_local_qp(cost.shifted(shift), feasible_set, tol=tol, x0=x0).x
        c = feasible_set.interior_point() if center is None else np.asarray(center, dtype=float)
        Hs = cost.H + 0.5 * mu * np.eye(cost.dim)
        qs = cost.q + shift - mu * c
        return solve_local_qp(QuadCost(Hs, qs), feasible_set, tol=tol, x0=x0).x
    if prox == PROX_LOGBARRIER:
        if mu == 0.0:
            return solve_local_qp(cost.shifted(shift), feasible_set, tol=tol, x0=x0).x
        start = feasible_set.interior_point() if x0 is None else np.asarray(x0, dtype=float)
        bval, _, _ = _barrier_parts(feasible_set, start)
        if not np.isfinite(bval):
            start = feasible_set.interior_point()
        return _newton_barrier(cost, feasible_set, shift, mu, tol, start)
    raise ValueError(f"unknown prox kind {prox!r}")


def finite_diff_gradient(fn, v, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of a scalar function."""
    v = np.asarray(v, dtype=float)
    g = np.zeros(v.size)
    for j in range(v.size):
        e = np.zeros(v.size)
        e[j] = h
        g[j] = (fn(v + e) - fn(v - e)) / (2.0 * h)
    return g


def finite_diff_jacobian(fn, v, h: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of a vector function (columns = inputs)."""
    v = np.asarray(v, dtype=float)
    cols = []
    for j in range(v.size):
        e = np.zeros(v.size)
        e[j] = h
        cols.append((np.asarray(fn(v + e)) - np.asarray(fn(v - e))) / (2.0 * h))
    return np.stack(cols, axis=1)
