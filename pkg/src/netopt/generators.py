"""Structured instance generators for the three problem classes.

Every generator is deterministic given its seed (the satellite family takes
no randomness at all) and returns the problem together with the side
information tests need: ground truth, plant matrices, discretization data.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm, solve_discrete_are

from .problems import (
    Box,
    Polyhedron,
    ProblemCCDC,
    ProblemDCCC,
    ProblemDCx,
    QuadCost,
    RowBlock,
)

__all__ = [
    "LinearPlant",
    "CWParams",
    "make_plant",
    "gen_mhe_dcx",
    "gen_control_dccc",
    "cw_discretize",
    "gen_satellite_ccdc",
    "gen_coupled_cooperative",
]


@dataclass
class LinearPlant:
    """Discrete-time plant ``x+ = A x + w`` observed by per-agent rows of C."""

    A: np.ndarray
    C: list

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        self.C = [np.atleast_2d(np.asarray(Ci, dtype=float)) for Ci in self.C]
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ValueError("A must be square")
        for i, Ci in enumerate(self.C):
            if Ci.shape[1] != n:
                raise ValueError(f"C_{i} has {Ci.shape[1]} columns, expected {n}")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def n_agents(self) -> int:
        return len(self.C)


def make_plant(
    M: int,
    n: int,
    p: int,
    seed,
    radius: float = 0.9,
    normal: bool = True,
    angle: float | None = None,
) -> LinearPlant:
    """Random stable plant with one p-row output block per agent.

    With ``normal`` set (the default) the dynamics are damped planar
    rotations, so ``||A^t|| = radius^t`` with no transient growth and the
    estimation problem stays well conditioned as the window grows. Set it
    False for a fully random (generally non-normal) stable matrix. A fixed
    ``angle`` pins the rotation rate; otherwise it is drawn per plane.
    """
    rng = np.random.default_rng(seed)
    if normal:
        A = np.zeros((n, n))
        for k in range(0, n - 1, 2):
            th = rng.uniform(0.3, 1.2) if angle is None else angle
            c, s = math.cos(th), math.sin(th)
            A[k : k + 2, k : k + 2] = [[c, -s], [s, c]]
        if n % 2:
            A[n - 1, n - 1] = 1.0
        A *= radius
    else:
        A = rng.normal(size=(n, n))
        rho = max(abs(np.linalg.eigvals(A)))
        A *= radius / max(rho, 1e-12)
    C = [rng.normal(size=(p, n)) for _ in range(M)]
    return LinearPlant(A, C)


def gen_mhe_dcx(
    M: int,
    N: int,
    n: int = 2,
    p: int = 1,
    seed=0,
    noise_scale: float = 0.05,
    q_weight: float = 1.0,
    r_weight: float = 1.0,
    margin: float = 4.0,
    center_shift: float = 0.0,
    angle: float | None = None,
    plant: LinearPlant | None = None,
):
    """Horizon estimation shared by M sensors as a shared-variable problem.

    The joint variable is ``z = (x_0, w_0, ..., w_{N-1})``. Agent i's cost is
    its own measurement residuals over the window plus 1/M of the process
    and arrival terms, so the agent costs sum to the full estimation cost.
    At ``noise_scale = 0`` the true trajectory has cost exactly zero.

    Returns ``(problem, info)`` with the truth, plant, and weights in info.
    """
    if plant is None:
        plant = make_plant(M, n, p, seed, angle=angle)
    if plant.n_agents != M:
        raise ValueError("plant has wrong number of measurement blocks")
    n = plant.n
    rng = np.random.default_rng(seed)
    A = plant.A

    # steady-state estimation accuracy sets the arrival weight
    C_all = np.vstack(plant.C)
    Q = q_weight * np.eye(n)
    R_all = r_weight * np.eye(C_all.shape[0])
    P = solve_discrete_are(A.T, C_all.T, Q, R_all)
    Pi = np.linalg.inv(P)
    Pi = 0.5 * (Pi + Pi.T)

    # simulate the window
    x_true = np.zeros((N + 1, n))
    x_true[0] = rng.normal(size=n)
    w_true = noise_scale * rng.normal(size=(N, n))
    for t in range(N):
        x_true[t + 1] = A @ x_true[t] + w_true[t]
    prior = x_true[0] + noise_scale * rng.normal(size=n)

    dim = n * (N + 1)
    # state response: x_t = A^t z_x + sum_{s<t} A^(t-1-s) w_s
    powers = [np.eye(n)]
    for _ in range(N):
        powers.append(A @ powers[-1])
    state_maps = []
    for t in range(N + 1):
        S = np.zeros((n, dim))
        S[:, :n] = powers[t]
        for s in range(t):
            S[:, n * (1 + s) : n * (2 + s)] = powers[t - 1 - s]
        state_maps.append(S)

    z_true = np.concatenate([x_true[0], w_true.ravel()])

    w_inv = np.linalg.inv(q_weight * np.eye(n))
    costs = []
    shared_H = np.zeros((dim, dim))
    shared_q = np.zeros(dim)
    shared_c = 0.0
    # process term  sum_t w_t' Q^-1 w_t
    for t in range(N):
        idx = slice(n * (1 + t), n * (2 + t))
        shared_H[idx, idx] += w_inv
    # arrival term  (x_0 - prior)' Pi (x_0 - prior)
    shared_H[:n, :n] += Pi
    shared_q[:n] += -2.0 * (Pi @ prior)
    shared_c += float(prior @ Pi @ prior)

    measurements = []
    for i in range(M):
        Ci = plant.C[i]
        Ri_inv = np.eye(Ci.shape[0]) / r_weight
        Hi = shared_H / M
        qi = shared_q / M
        ci = shared_c / M
        ys = []
        for t in range(N + 1):
            y = Ci @ x_true[t] + noise_scale * rng.normal(size=Ci.shape[0])
            ys.append(y)
            Phi = Ci @ state_maps[t]
            Hi = Hi + Phi.T @ Ri_inv @ Phi
            qi = qi - 2.0 * Phi.T @ (Ri_inv @ y)
            ci = ci + float(y @ Ri_inv @ y)
        measurements.append(np.stack(ys))
        costs.append(QuadCost(Hi, qi, ci))

    half = margin * (1.0 + np.abs(z_true))
    # an off-center box makes the default start (its midpoint) a nontrivial
    # distance from the estimate, as a cold-started estimator would be
    shift = center_shift * (1.0 + np.abs(z_true)) * rng.choice([-1.0, 1.0], size=dim)
    common = Box(z_true - half + shift, z_true + half + shift)
    problem = ProblemDCx(costs, common)
    info = {
        "plant": plant,
        "truth": z_true,
        "states": x_true,
        "prior": prior,
        "arrival_weight": Pi,
        "measurements": measurements,
        "noise_scale": noise_scale,
    }
    return problem, info


# ---------------------------------------------------------------------------
# networked control with eliminated states


def gen_control_dccc(
    M: int,
    N: int,
    n: int = 2,
    m: int = 1,
    p: int = 1,
    seed=0,
    neighbors=None,
    coupling_scale: float = 0.1,
    u_max: float = 1.0,
    w_margin: float = 1.0,
    state_margin: float = 1.0,
    q_weight: float = 1.0,
    r_weight: float = 1.0,
):
    """Coupled subsystems over a horizon, coupling rows owned per receiver.

    Each subsystem runs ``s+ = A_i s + B_i u + E_i w`` where ``w`` collects
    scaled neighbor states; eliminating states leaves the per-agent variable
    ``z^i = (w^i_0..w^i_{N-1}, u^i_0..u^i_{N-1})`` and linear consistency
    rows ``w^i_t = sum_j K_ij s^j_t``. The zero-input trajectory gives every
    set a strict interior point and the targets their right-hand side.

    Returns ``(problem, info)``.
    """
    if M < 2:
        raise ValueError("need at least two agents")
    rng = np.random.default_rng(seed)
    if neighbors is None:
        neighbors = [((i - 1) % M,) for i in range(M)]
    neighbors = [tuple(int(j) for j in nb) for nb in neighbors]
    for i, nb in enumerate(neighbors):
        if p > 0 and not nb:
            raise ValueError(f"agent {i} receives coupling but has no neighbors")
        if i in nb:
            raise ValueError("self loops are not allowed in the interconnection")

    A_list, B_list, E_list, K_list, s0_list = [], [], [], [], []
    for i in range(M):
        A = rng.normal(size=(n, n))
        rho = max(abs(np.linalg.eigvals(A)))
        A *= 0.95 / max(rho, 1e-12)
        B = rng.normal(size=(n, m))
        E = np.linalg.qr(rng.normal(size=(n, p)))[0][:, :p]
        A_list.append(A)
        B_list.append(B)
        E_list.append(E)
        K_list.append(
            {j: coupling_scale * rng.uniform(-1.0, 1.0, size=(p, n)) for j in neighbors[i]}
        )
        s0_list.append(rng.normal(size=n))

    dim_z = N * (p + m)

    def responses(i):
        """Affine maps z^i -> s^i_t for t = 0..N (constant part, matrix part)."""
        A, B, E = A_list[i], B_list[i], E_list[i]
        const = [s0_list[i]]
        mat = [np.zeros((n, dim_z))]
        for t in range(N):
            S = A @ mat[t]
            S[:, t * p : (t + 1) * p] += E
            S[:, N * p + t * m : N * p + (t + 1) * m] += B
            mat.append(S)
            const.append(A @ const[t])
        return const, mat

    resp = [responses(i) for i in range(M)]

    # simulate the natural (u = 0) coupled trajectory for interior points
    s_nat = [np.array([s0_list[i] for i in range(M)])]
    w_nat = []
    for t in range(N):
        w_t = []
        for i in range(M):
            w = np.zeros(p)
            for j in neighbors[i]:
                w += K_list[i][j] @ s_nat[t][j]
            w_t.append(w)
        w_nat.append(np.array(w_t))
        nxt = []
        for i in range(M):
            nxt.append(A_list[i] @ s_nat[t][i] + E_list[i] @ w_t[i])
        s_nat.append(np.array(nxt))
    s_nat = np.array(s_nat)  # (N+1, M, n)
    w_nat = np.array(w_nat)  # (N, M, p)

    n_rows = N * p * M
    row_of = lambda i, t: slice((i * N + t) * p, (i * N + t + 1) * p)

    couplings = [np.zeros((n_rows, dim_z)) for _ in range(M)]
    g = np.zeros(n_rows)
    blocks = []
    for i in range(M):
        rows = np.arange(i * N * p, (i + 1) * N * p)
        for t in range(N):
            r = row_of(i, t)
            couplings[i][r, t * p : (t + 1) * p] += np.eye(p)
            for j in neighbors[i]:
                cj, mj = resp[j]
                couplings[j][r, :] -= K_list[i][j] @ mj[t]
                g[r] += K_list[i][j] @ cj[t]
        blocks.append(RowBlock(i, rows, (i, *neighbors[i])))

    costs = []
    sets = []
    interiors = []
    for i in range(M):
        ci, mi = resp[i]
        Hi = np.zeros((dim_z, dim_z))
        qi = np.zeros(dim_z)
        c0 = 0.0
        for t in range(1, N + 1):
            Hi += q_weight * mi[t].T @ mi[t]
            qi += 2.0 * q_weight * mi[t].T @ ci[t]
            c0 += q_weight * float(ci[t] @ ci[t])
        for t in range(N):
            idx = slice(N * p + t * m, N * p + (t + 1) * m)
            Hi[idx, idx] += r_weight * np.eye(m)
        costs.append(QuadCost(Hi, qi, c0))

        z_nat = np.concatenate([w_nat[:, i, :].ravel(), np.zeros(N * m)])
        interiors.append(z_nat)
        # box rows on w and u, plus pulled-back state bounds with margins
        rows_A = []
        rows_b = []
        eye = np.eye(dim_z)
        for r in range(N * p):
            hi = w_nat[:, i, :].ravel()[r]
            rows_A += [eye[r], -eye[r]]
            rows_b += [hi + w_margin, -(hi - w_margin)]
        for r in range(N * p, dim_z):
            rows_A += [eye[r], -eye[r]]
            rows_b += [u_max, u_max]
        for t in range(1, N + 1):
            bound = np.abs(s_nat[t, i]) + state_margin
            rows_A += [mi[t], -mi[t]]
            rows_b += [bound - ci[t], bound + ci[t]]
        A_rows = np.vstack([np.atleast_2d(r) for r in rows_A])
        b_rows = np.concatenate([np.atleast_1d(b) for b in rows_b])
        sets.append(Polyhedron(A_rows, b_rows, z_nat))

    problem = ProblemDCCC(costs, sets, couplings, g, row_blocks=blocks)
    info = {
        "A": A_list,
        "B": B_list,
        "E": E_list,
        "K": K_list,
        "s0": s0_list,
        "neighbors": neighbors,
        "natural_states": s_nat,
        "natural_inputs": w_nat,
        "interiors": interiors,
        "horizon": N,
    }
    return problem, info


# ---------------------------------------------------------------------------
# satellite formation keeping


@dataclass
class CWParams:
    """Relative-orbit dynamics and formation cost scales.

    ``omega`` is the reference orbital rate; ``q_weight`` scales the
    formation error term and ``auto_q`` (when set) rescales it so the
    strongest formation mode has the given curvature, which keeps the
    simultaneous sweep contractive for the damping levels of interest.
    Thrust is parameterized in units of ``u_scale`` m/s^2 so the optimal
    inputs are O(100) instead of sub-milli; the discretization itself is
    unit free.
    """

    omega: float = 2.0 * math.pi / 5400.0
    dt: float = 30.0
    N: int = 10
    radius: float = 5000.0
    u_scale: float = 1e-4
    u_max: float = 2000.0
    q_weight: float = 1.0
    auto_q: float | None = 0.0248
    r_weight: float = 1.0


def cw_matrices(omega: float):
    """Continuous-time relative dynamics for state (x1, x2, x3, v1, v2, v3)."""
    w = omega
    A = np.zeros((6, 6))
    A[:3, 3:] = np.eye(3)
    A[3, 0] = 3.0 * w * w
    A[3, 4] = 2.0 * w
    A[4, 3] = -2.0 * w
    A[5, 2] = -w * w
    B = np.zeros((6, 3))
    B[3:, :] = np.eye(3)
    return A, B


def cw_discretize(omega: float, dt: float):
    """Exact zero-order-hold discretization via the augmented exponential."""
    A, B = cw_matrices(omega)
    aug = np.zeros((9, 9))
    aug[:6, :6] = A
    aug[:6, 6:] = B
    E = expm(aug * dt)
    return E[:6, :6], E[:6, 6:]


def gen_satellite_ccdc(M: int, sigma: float, params: CWParams | None = None):
    """Ring formation of M satellites minimizing relative position error.

    The cost is ``sum_i ||2 y^i - y^(i+1) - y^(i-1)||^2_Q + sigma ||u^i||^2``
    over a horizon, with positions ``y`` responding to each satellite's own
    thrust sequence. Blocks farther than two ring positions apart are
    structurally zero. Initial states are deterministic offsets on a circle.

    Returns ``(problem, info)``.
    """
    if M < 3:
        raise ValueError("a ring formation needs at least three satellites")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    params = params or CWParams()
    N = params.N
    Ad, Bd = cw_discretize(params.omega, params.dt)
    C = np.zeros((3, 6))
    C[:, :3] = np.eye(3)

    dim = 3 * N
    # y_t = C A^t s0 + C sum_{s<t} A^(t-1-s) B u_s, stacked over t = 1..N
    powers = [np.eye(6)]
    for _ in range(N):
        powers.append(Ad @ powers[-1])
    Psi = np.zeros((3 * N, dim))
    for t in range(1, N + 1):
        for s in range(t):
            Psi[3 * (t - 1) : 3 * t, 3 * s : 3 * (s + 1)] = (
                params.u_scale * (C @ powers[t - 1 - s] @ Bd)
            )

    q_weight = params.q_weight
    W = Psi.T @ Psi
    if params.auto_q is not None:
        top = float(np.linalg.eigvalsh(W)[-1])
        q_weight = params.auto_q / top
    W = q_weight * W

    # deterministic ring of initial positions, at rest
    s0 = []
    for i in range(M):
        ang = 2.0 * math.pi * i / M
        s = np.zeros(6)
        s[0] = params.radius * math.cos(ang)
        s[1] = params.radius * math.sin(ang)
        s[2] = params.radius * 0.1 * math.cos(2 * ang)
        s0.append(s)
    consts = []
    for i in range(M):
        c = np.concatenate([C @ powers[t] @ s0[i] for t in range(1, N + 1)])
        consts.append(c)

    # formation coefficients: row i reads 2 y^i - y^(i+1) - y^(i-1)
    L = np.zeros((M, M))
    for i in range(M):
        L[i, i] += 2.0
        L[i, (i + 1) % M] -= 1.0
        L[i, (i - 1) % M] -= 1.0
    Gamma = L.T @ L

    # entries of L'L are exact small-integer arithmetic, so structural
    # zeros beyond ring distance two are exact
    blocks = [[None] * M for _ in range(M)]
    for i in range(M):
        for j in range(M):
            if Gamma[i, j] != 0.0 or i == j:
                blk = Gamma[i, j] * W
                if i == j:
                    blk = blk + sigma * params.r_weight * np.eye(dim)
                blocks[i][j] = blk

    const_stack = np.stack(consts)  # (M, 3N)
    residuals = L @ const_stack  # row k: 2 c^k - c^(k+1) - c^(k-1)
    linear = []
    const = 0.0
    for j in range(M):
        q = np.zeros(dim)
        for k in range(M):
            if L[k, j] != 0.0:
                q += 2.0 * L[k, j] * q_weight * (Psi.T @ residuals[k])
        linear.append(q)
    for k in range(M):
        const += q_weight * float(residuals[k] @ residuals[k])

    sets = [Box(-params.u_max * np.ones(dim), params.u_max * np.ones(dim)) for _ in range(M)]
    problem = ProblemCCDC(blocks, linear, sets, constant=const)
    info = {
        "A_d": Ad,
        "B_d": Bd,
        "omega": params.omega,
        "dt": params.dt,
        "horizon": N,
        "initial_states": s0,
        "response": Psi,
        "q_weight": q_weight,
        "sigma": sigma,
    }
    return problem, info


# ---------------------------------------------------------------------------
# cooperative neighborhoods


def gen_coupled_cooperative(
    M: int,
    d: int = 2,
    seed=0,
    extra_edges: int = 0,
    rho: float = 0.1,
    box: float = 3.0,
):
    """Neighborhood least-squares teams sharing one coupled cost.

    Agent i's term reads the blocks in its neighborhood ``N^i`` (itself,
    ring neighbors, optional random extras), so ``H_jk`` is nonzero exactly
    when j and k appear in a common neighborhood. Returns
    ``(problem, weights)`` with positive weights summing to one.
    """
    if M < 3:
        raise ValueError("need at least three agents")
    rng = np.random.default_rng(seed)
    hoods = []
    for i in range(M):
        nb = {i, (i - 1) % M, (i + 1) % M}
        hoods.append(nb)
    for _ in range(extra_edges):
        i = int(rng.integers(M))
        j = int(rng.integers(M))
        if i != j:
            hoods[i].add(j)
    hoods = [tuple(sorted(h)) for h in hoods]

    H = [[None] * M for _ in range(M)]
    q = [np.zeros(d) for _ in range(M)]
    c0 = 0.0

    def bump(j, k, val):
        if H[j][k] is None:
            H[j][k] = val.copy()
        else:
            H[j][k] = H[j][k] + val

    for i, hood in enumerate(hoods):
        S = {j: rng.normal(size=(d, d)) / math.sqrt(d) for j in hood}
        b = rng.normal(size=d)
        for j in hood:
            for k in hood:
                bump(j, k, S[j].T @ S[k])
            q[j] += -2.0 * S[j].T @ b
        c0 += float(b @ b)
    for i in range(M):
        bump(i, i, rho * np.eye(d))

    for i in range(M):
        for j in range(M):
            if H[i][j] is not None and H[j][i] is None:
                H[j][i] = H[i][j].T

    sets = [Box(-box * np.ones(d), box * np.ones(d)) for _ in range(M)]
    problem = ProblemCCDC(H, q, sets, constant=c0)

    raw = 1.0 + rng.uniform(size=M)
    weights = raw / raw.sum()
    return problem, weights
