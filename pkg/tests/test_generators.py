"""Instance generators: determinism, ground-truth identities, structure."""

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from netopt.generators import (
    CWParams,
    cw_discretize,
    cw_matrices,
    gen_control_dccc,
    gen_coupled_cooperative,
    gen_mhe_dcx,
    gen_satellite_ccdc,
)
from netopt.problems import evaluate
from netopt.serialize import fingerprint


class TestDeterminism:
    def test_same_seed_same_fingerprint(self):
        a, _ = gen_mhe_dcx(4, 3, n=2, p=2, seed=11)
        b, _ = gen_mhe_dcx(4, 3, n=2, p=2, seed=11)
        assert fingerprint(a) == fingerprint(b)

    def test_different_seed_different_fingerprint(self):
        a, _ = gen_mhe_dcx(4, 3, n=2, p=2, seed=11)
        b, _ = gen_mhe_dcx(4, 3, n=2, p=2, seed=12)
        assert fingerprint(a) != fingerprint(b)

    def test_all_families_reproducible(self):
        pairs = [
            (gen_control_dccc(3, 4, n=2, m=1, p=1, seed=5)[0],
             gen_control_dccc(3, 4, n=2, m=1, p=1, seed=5)[0]),
            (gen_satellite_ccdc(4, 1.0)[0], gen_satellite_ccdc(4, 1.0)[0]),
            (gen_coupled_cooperative(5, seed=9)[0],
             gen_coupled_cooperative(5, seed=9)[0]),
        ]
        for a, b in pairs:
            assert fingerprint(a) == fingerprint(b)


class TestEstimation:
    def test_noiseless_truth_has_zero_cost(self):
        problem, info = gen_mhe_dcx(5, 4, n=2, p=2, seed=1, noise_scale=0.0)
        val = sum(c.value(info["truth"]) for c in problem.costs)
        assert abs(val) < 1e-10

    def test_costs_add_up_to_estimation_objective(self, tiny_mhe):
        problem, info = tiny_mhe
        plant = info["plant"]
        A, Pi, prior = plant.A, info["arrival_weight"], info["prior"]
        n = plant.n
        N = info["states"].shape[0] - 1
        rng = np.random.default_rng(0)
        for _ in range(3):
            z = rng.normal(size=problem.dim)
            x0, w = z[:n], z[n:].reshape(N, n)
            xs = [x0]
            for t in range(N):
                xs.append(A @ xs[t] + w[t])
            want = float((x0 - prior) @ Pi @ (x0 - prior))
            want += sum(float(wt @ wt) for wt in w)
            for i in range(problem.n_agents):
                Ci = plant.C[i]
                for t in range(N + 1):
                    r = Ci @ xs[t] - info["measurements"][i][t]
                    want += float(r @ r)
            got = sum(c.value(z) for c in problem.costs)
            assert got == pytest.approx(want, rel=1e-9)

    def test_truth_lies_inside_the_box(self, tiny_mhe):
        problem, info = tiny_mhe
        assert problem.common_set.contains(info["truth"])

    def test_rejects_mismatched_plant(self):
        _, info = gen_mhe_dcx(3, 2, seed=0)
        with pytest.raises(ValueError):
            gen_mhe_dcx(5, 2, seed=0, plant=info["plant"])


class TestControl:
    def test_natural_trajectory_satisfies_coupling(self):
        problem, info = gen_control_dccc(4, 5, n=3, m=2, p=1, seed=8)
        resid = problem.coupling_residual(info["interiors"])
        assert np.abs(resid).max() < 1e-10

    def test_interiors_strictly_feasible(self):
        problem, info = gen_control_dccc(4, 5, n=3, m=2, p=1, seed=8)
        for z, s in zip(info["interiors"], problem.local_sets):
            assert np.all(s.A @ z < s.b)

    def test_state_elimination_matches_simulation(self):
        M, N, n, m, p = 3, 4, 2, 1, 1
        problem, info = gen_control_dccc(M, N, n=n, m=m, p=p, seed=21)
        rng = np.random.default_rng(2)
        zs = [rng.normal(size=N * (p + m)) for _ in range(M)]

        # simulate each subsystem under its own (w, u) pieces of z
        states = [[info["s0"][i]] for i in range(M)]
        for t in range(N):
            for i in range(M):
                w = zs[i][t * p:(t + 1) * p]
                u = zs[i][N * p + t * m: N * p + (t + 1) * m]
                s = info["A"][i] @ states[i][t] + info["B"][i] @ u + info["E"][i] @ w
                states[i].append(s)

        # row (i, t): w^i_t - sum_j K_ij s^j_t
        want = np.zeros(M * N * p)
        for i in range(M):
            for t in range(N):
                row = (i * N + t) * p
                val = zs[i][t * p:(t + 1) * p].copy()
                for j in info["neighbors"][i]:
                    val -= info["K"][i][j] @ states[j][t]
                want[row:row + p] = val
        got = problem.coupling_residual(zs)
        np.testing.assert_allclose(got, want, atol=1e-10)

    def test_row_blocks_present_and_partitioning(self):
        problem, _ = gen_control_dccc(3, 4, seed=0)
        rows = np.concatenate([b.rows for b in problem.row_blocks])
        assert sorted(rows.tolist()) == list(range(problem.n_coupling))
        for blk in problem.row_blocks:
            assert blk.owner in blk.neighbors

    def test_rejects_single_agent(self):
        with pytest.raises(ValueError):
            gen_control_dccc(1, 4)

    def test_rejects_self_loop_neighbors(self):
        with pytest.raises(ValueError):
            gen_control_dccc(3, 4, neighbors=[(0,), (0,), (1,)])


class TestSatellite:
    def test_discretization_matches_ode_integration(self):
        omega = 2 * np.pi / 5400.0
        dt = 30.0
        Ad, Bd = cw_discretize(omega, dt)
        A, B = cw_matrices(omega)
        rng = np.random.default_rng(4)
        s0 = rng.normal(size=6)
        u = rng.normal(size=3)
        sol = solve_ivp(
            lambda t, s: A @ s + B @ u, (0.0, dt), s0, rtol=1e-12, atol=1e-12
        )
        np.testing.assert_allclose(Ad @ s0 + Bd @ u, sol.y[:, -1], atol=1e-8)

    def test_band_structure_is_exact(self):
        problem, _ = gen_satellite_ccdc(7, 1.0)
        for i in range(7):
            for j in range(7):
                dist = min((i - j) % 7, (j - i) % 7)
                if dist > 2:
                    assert problem.blocks[i][j] is None
                else:
                    assert problem.blocks[i][j] is not None

    def test_objective_is_formation_error_plus_thrust(self):
        M = 5
        params = CWParams(N=4)
        problem, info = gen_satellite_ccdc(M, sigma=2.0, params=params)
        Psi, qw = info["response"], info["q_weight"]
        Ad = info["A_d"]
        C = np.zeros((3, 6))
        C[:, :3] = np.eye(3)
        rng = np.random.default_rng(6)
        us = [rng.normal(size=problem.dims[i]) for i in range(M)]

        ys = []
        for i in range(M):
            free = [
                C @ np.linalg.matrix_power(Ad, t) @ info["initial_states"][i]
                for t in range(1, params.N + 1)
            ]
            ys.append(Psi @ us[i] + np.concatenate(free))
        want = 0.0
        for i in range(M):
            r = 2 * ys[i] - ys[(i + 1) % M] - ys[(i - 1) % M]
            want += qw * float(r @ r) + 2.0 * float(us[i] @ us[i])
        got = evaluate(problem, us)[0]
        assert got == pytest.approx(want, rel=1e-9)

    def test_rejects_small_ring_and_bad_sigma(self):
        with pytest.raises(ValueError):
            gen_satellite_ccdc(2, 1.0)
        with pytest.raises(ValueError):
            gen_satellite_ccdc(5, 0.0)


class TestCooperative:
    def test_weights_positive_sum_one(self):
        _, w = gen_coupled_cooperative(6, seed=3)
        assert np.all(w > 0)
        assert abs(w.sum() - 1.0) < 1e-12

    def test_ring_neighbors_interact(self):
        problem, _ = gen_coupled_cooperative(6, seed=3)
        for i in range(6):
            assert problem.blocks[i][(i + 1) % 6] is not None
        assert problem.mask.T.tolist() == problem.mask.tolist()

    def test_rejects_tiny_team(self):
        with pytest.raises(ValueError):
            gen_coupled_cooperative(2)
