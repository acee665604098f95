"""Dual methods for linearly coupled problems: subgradient ascent, allocation
splitting, the accelerated smoothed ascent, and the interior-point path."""

import numpy as np
import pytest

from netopt.duality import (
    DipSolver,
    DualState,
    SubproblemInfeasible,
    coupling_norm,
    dfg_init,
    dfg_step,
    dip_solve,
    ds_default_alpha,
    ds_step,
    ds_step_blocks,
    dual_hessian,
    dual_value_and_subgradient,
    ps_init,
    ps_step,
    smoothing_for,
    smoothing_lipschitz,
    strong_convexity,
)
from netopt.consensus import HarmonicStep
from netopt.network import RoundLedger
from netopt.oracle import solve_centralized
from netopt.problems import ProblemDCCC, RowBlock
from netopt.qp import PROX_LOGBARRIER, finite_diff_gradient, finite_diff_jacobian

from conftest import make_allocation


@pytest.fixture(scope="module")
def alloc():
    return make_allocation(5, M=4, d=3)


@pytest.fixture(scope="module")
def alloc_ref(alloc):
    return solve_centralized(alloc)


class TestDualFunction:
    def test_subgradient_is_residual_at_minimizers(self, alloc):
        lam = np.array([0.3, -0.1, 0.7])
        _, sub, xs = dual_value_and_subgradient(alloc, lam)
        np.testing.assert_allclose(
            sub, alloc.coupling_residual(xs), atol=1e-12
        )

    def test_weak_duality(self, alloc, alloc_ref):
        rng = np.random.default_rng(3)
        for _ in range(5):
            val, _, _ = dual_value_and_subgradient(alloc, rng.normal(size=3))
            assert val <= alloc_ref.objective + 1e-8

    def test_smoothed_gradient_matches_finite_differences(self, alloc):
        mu = 0.05
        lam0 = np.array([0.2, 0.1, -0.3])

        def val(lam):
            return dual_value_and_subgradient(alloc, lam, mu=mu)[0]

        _, grad, _ = dual_value_and_subgradient(alloc, lam0, mu=mu)
        num = finite_diff_gradient(val, lam0, h=1e-6)
        np.testing.assert_allclose(grad, num, rtol=1e-5, atol=1e-7)

    def test_wrong_multiplier_shape(self, alloc):
        with pytest.raises(ValueError):
            dual_value_and_subgradient(alloc, np.zeros(2))

    def test_unreachable_target_raises(self, alloc):
        # boxes span [-2, 2], so a target of 50 has no feasible preimage
        t0 = np.full((alloc.n_agents - 1, alloc.rhs.size), 50.0)
        with pytest.raises(SubproblemInfeasible):
            ps_init(alloc, t0=t0)


class TestDualSubgradient:
    def test_converges_and_matches_oracle_multipliers(self, alloc, alloc_ref):
        st = DualState(np.zeros(3))
        alpha = ds_default_alpha(alloc)
        for _ in range(4000):
            st = ds_step(alloc, st, alpha)
        _, sub, xs = dual_value_and_subgradient(alloc, st.lam)
        assert np.linalg.norm(sub) < 1e-6
        np.testing.assert_allclose(st.lam, alloc_ref.multipliers, atol=1e-4)

    def test_block_update_matches_flat_bitwise(self, alloc):
        # identity couplings touch every agent, so each block lists them all
        everyone = tuple(range(alloc.n_agents))
        blocked = ProblemDCCC(
            alloc.costs,
            alloc.local_sets,
            alloc.couplings,
            alloc.rhs,
            row_blocks=[
                RowBlock(0, np.array([0, 1]), everyone),
                RowBlock(1, np.array([2]), everyone),
            ],
        )
        a = DualState(np.zeros(3))
        b = DualState(np.zeros(3))
        for _ in range(25):
            a = ds_step(alloc, a, 0.05)
            b = ds_step_blocks(blocked, b, 0.05)
            np.testing.assert_array_equal(a.lam, b.lam)

    def test_residual_large_early_small_late(self, alloc):
        st = DualState(np.zeros(3))
        st = ds_step(alloc, st, ds_default_alpha(alloc))
        early = np.linalg.norm(alloc.coupling_residual(st.xs))
        assert early > 1e-3
        for _ in range(3000):
            st = ds_step(alloc, st, ds_default_alpha(alloc))
        late = np.linalg.norm(alloc.coupling_residual(st.xs))
        assert late <= 1e-3

    def test_messages_per_step(self, alloc):
        led = RoundLedger()
        st = DualState(np.zeros(3))
        st = ds_step(alloc, st, 0.1, ledger=led)
        st = ds_step(alloc, st, 0.1, ledger=led)
        assert led.n_rounds == 2
        assert led.total > 0 and led.total % 2 == 0

    def test_blocks_required_for_block_form(self, alloc):
        assert alloc.row_blocks is None
        with pytest.raises(ValueError):
            ds_step_blocks(alloc, DualState(np.zeros(3)), 0.1)


class TestAllocationSplitting:
    def test_every_iterate_is_primal_feasible(self, alloc, alloc_ref):
        st = ps_init(alloc)
        rule = HarmonicStep(0.5, 1.0)
        vals = []
        for _ in range(60):
            st = ps_step(alloc, st, rule)
            resid = alloc.coupling_residual(st.xs)
            assert np.linalg.norm(resid) <= 1e-9
            vals.append(st.master_value)
        assert vals[-1] <= vals[0] + 1e-12
        assert vals[-1] >= alloc_ref.objective - 1e-8

    def test_init_rejects_bad_target_shape(self, alloc):
        with pytest.raises(ValueError):
            ps_init(alloc, t0=np.zeros((2, 2)))

    def test_backtracking_recovers_from_huge_step(self, alloc):
        st = ps_init(alloc)
        st = ps_step(alloc, st, 1e6)  # must halve its way back to feasibility
        assert np.linalg.norm(alloc.coupling_residual(st.xs)) <= 1e-9

    def test_ledger_counts_backtracks(self, alloc):
        led = RoundLedger()
        st = ps_init(alloc)
        st = ps_step(alloc, st, 1e6, ledger=led)
        assert led.n_rounds >= 2  # at least one halving happened


class TestFastGradient:
    def test_accepted_values_monotone(self, alloc):
        mu = smoothing_for(alloc, 1e-3)
        lip = smoothing_lipschitz(alloc, mu)
        st = dfg_init(alloc)
        seen = []
        for _ in range(80):
            st = dfg_step(alloc, st, mu, lip)
            if np.isfinite(st.value_bar):
                seen.append(st.value_bar)
        tol = 1e-12 * (1 + max(abs(v) for v in seen))
        assert all(b >= a - tol for a, b in zip(seen, seen[1:]))

    def test_reaches_near_optimal_value(self, alloc, alloc_ref):
        eps = 1e-3
        mu = smoothing_for(alloc, eps)
        lip = smoothing_lipschitz(alloc, mu)
        st = dfg_init(alloc)
        for _ in range(3000):
            st = dfg_step(alloc, st, mu, lip)
            if alloc_ref.objective - st.value_bar <= eps:
                break
        assert alloc_ref.objective - st.value_bar <= eps

    def test_plain_ascent_needs_no_second_eval(self, alloc):
        led = RoundLedger()
        mu = smoothing_for(alloc, 1e-2)
        st = dfg_init(alloc)
        dfg_step(alloc, st, mu, momentum=False, ledger=led)
        assert led.n_rounds == 1
        led2 = RoundLedger()
        dfg_step(alloc, st, mu, ledger=led2)
        assert led2.n_rounds == 2

    def test_rejects_nonpositive_mu(self, alloc):
        with pytest.raises(ValueError):
            dfg_step(alloc, dfg_init(alloc), 0.0)

    def test_smoothing_constants_scale(self, alloc):
        assert smoothing_for(alloc, 1e-2) > smoothing_for(alloc, 1e-4)
        mu = 0.01
        assert smoothing_lipschitz(alloc, mu) >= coupling_norm(alloc) ** 2 / (
            2 * strong_convexity(alloc) + mu
        ) * 0.99


class TestInteriorPath:
    def test_converges_to_oracle(self, alloc, alloc_ref):
        res = dip_solve(alloc, eps=1e-6)
        assert res.status == "optimal"
        assert abs(res.value - alloc_ref.objective) <= 1e-4
        np.testing.assert_allclose(res.lam, alloc_ref.multipliers, atol=1e-3)

    def test_stage_weights_shrink_geometrically(self, alloc):
        solver = DipSolver(alloc, eps=1e-5, shrink=0.2)
        res = solver.solve()
        mus = [mu for mu, _ in res.stages]
        for a, b in zip(mus, mus[1:]):
            assert b == pytest.approx(0.2 * a)
        assert mus[-1] * solver.complexity <= 1e-5

    def test_hessian_matches_finite_difference_jacobian(self, alloc):
        mu = 0.1
        lam0 = np.array([0.05, -0.02, 0.1])

        def grad(lam):
            return dual_value_and_subgradient(
                alloc, lam, mu=mu, prox=PROX_LOGBARRIER, tol=1e-12
            )[1]

        _, _, xs = dual_value_and_subgradient(
            alloc, lam0, mu=mu, prox=PROX_LOGBARRIER, tol=1e-12
        )
        H = dual_hessian(alloc, xs, mu)
        J = finite_diff_jacobian(grad, lam0, h=1e-5)
        np.testing.assert_allclose(H, 0.5 * (J + J.T), rtol=1e-4, atol=1e-6)

    def test_eps_validation(self, alloc):
        with pytest.raises(ValueError):
            DipSolver(alloc, eps=0.0)
        with pytest.raises(ValueError):
            DipSolver(alloc, shrink=1.0)

    def test_callback_sees_every_newton_step(self, alloc):
        seen = []
        DipSolver(alloc, eps=1e-4).solve(callback=lambda k, *rest: seen.append(k))
        assert seen == list(range(1, len(seen) + 1))
