"""Graphs, Metropolis weights, averaging rounds, message accounting."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netopt.network import (
    CommGraph,
    RoundLedger,
    WeightSchedule,
    check_joint_connectivity,
    complete_graph,
    consensus_round,
    metropolis_weights,
    path_graph,
    power_weights,
    ring_graph,
    star_graph,
)


class TestGraphs:
    def test_builders_node_and_edge_counts(self):
        assert len(path_graph(5).undirected_pairs()) == 4
        assert len(ring_graph(5).undirected_pairs()) == 5
        assert len(star_graph(5).undirected_pairs()) == 4
        assert len(complete_graph(5).undirected_pairs()) == 10

    def test_diameters(self):
        assert path_graph(6).diameter() == 5
        assert ring_graph(6).diameter() == 3
        assert star_graph(6).diameter() == 2
        assert complete_graph(6).diameter() == 1

    def test_all_builders_connected_and_symmetric(self):
        for g in (path_graph(7), ring_graph(7), star_graph(7), complete_graph(7)):
            assert g.is_connected()
            assert g.is_symmetric()

    def test_self_loop_rejected(self):
        with pytest.raises(ValueError):
            CommGraph(3, {(0, 0)})

    def test_out_of_range_edge_rejected(self):
        with pytest.raises(ValueError):
            CommGraph(3, {(0, 3)})

    def test_disconnected_detected(self):
        g = CommGraph(4, {(0, 1), (1, 0), (2, 3), (3, 2)})
        assert not g.is_connected()
        assert g.diameter() == -1

    def test_neighbors(self):
        assert star_graph(4).neighbors(0) == {1, 2, 3}
        assert star_graph(4).neighbors(2) == {0}


class TestMetropolis:
    @pytest.mark.parametrize("builder", [path_graph, ring_graph, star_graph, complete_graph])
    @pytest.mark.parametrize("m", [2, 5, 9])
    def test_doubly_stochastic(self, builder, m):
        if builder is ring_graph and m == 2:
            pytest.skip("ring degenerates to a path below 3 nodes")
        G = metropolis_weights(builder(m)).matrices[0]
        np.testing.assert_allclose(G.sum(axis=0), 1.0, atol=1e-12)
        np.testing.assert_allclose(G.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(G >= 0)
        assert np.all(np.diag(G) > 0)

    def test_hand_value_path3(self):
        # degrees 1,2,1 so the end edges get weight 1/3
        G = metropolis_weights(path_graph(3)).matrices[0]
        expect = np.array(
            [
                [2 / 3, 1 / 3, 0.0],
                [1 / 3, 1 / 3, 1 / 3],
                [0.0, 1 / 3, 2 / 3],
            ]
        )
        np.testing.assert_allclose(G, expect, atol=1e-15)

    def test_complete_graph_averages_exactly(self):
        m = 6
        G = metropolis_weights(complete_graph(m)).matrices[0]
        np.testing.assert_allclose(G, np.full((m, m), 1.0 / m), atol=1e-12)

    def test_sparsity_matches_graph(self):
        g = ring_graph(8)
        G = metropolis_weights(g).matrices[0]
        off = {(i, j) for i in range(8) for j in range(8) if i != j and G[i, j] != 0}
        assert off == g.edges

    def test_asymmetric_graph_rejected(self):
        with pytest.raises(ValueError):
            metropolis_weights(CommGraph(3, {(0, 1), (1, 0), (1, 2)}))


class TestAveraging:
    def test_average_preserved(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(7, 3))
        sched = metropolis_weights(ring_graph(7))
        Y = X.copy()
        for k in range(50):
            Y = consensus_round(sched, k, Y)
        np.testing.assert_allclose(Y.mean(axis=0), X.mean(axis=0), atol=1e-12)

    def test_disagreement_decays_within_bound(self):
        # 10 * M * diameter rounds pushes max deviation below 1e-8
        for builder in (path_graph, ring_graph, star_graph, complete_graph):
            g = builder(10)
            sched = metropolis_weights(g)
            rng = np.random.default_rng(1)
            X = rng.normal(size=(10, 2))
            budget = 10 * g.n_nodes * g.diameter()
            for k in range(budget):
                X = consensus_round(sched, k, X)
            dev = np.abs(X - X.mean(axis=0)).max()
            assert dev <= 1e-8, f"{builder.__name__}: {dev:.2e} after {budget}"

    def test_round_bills_every_active_edge(self):
        sched = metropolis_weights(path_graph(4))
        led = RoundLedger()
        X = np.zeros((4, 5))
        consensus_round(sched, 0, X, ledger=led)
        # 3 undirected edges, both directions, 5 scalars each
        assert led.total == 3 * 2 * 5
        assert led.n_rounds == 1

    def test_state_count_mismatch(self):
        sched = metropolis_weights(path_graph(4))
        with pytest.raises(ValueError):
            consensus_round(sched, 0, np.zeros((3, 2)))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(min_value=2, max_value=9), st.integers(min_value=0, max_value=10**6))
    def test_variance_never_increases(self, m, sk):
        rng = np.random.default_rng(sk)
        X = rng.normal(size=(m, 2))
        sched = metropolis_weights(path_graph(m))
        Y = consensus_round(sched, 0, X)
        var = lambda Z: ((Z - Z.mean(axis=0)) ** 2).sum()
        assert var(Y) <= var(X) + 1e-12


class TestSchedule:
    def test_row_sum_enforced(self):
        with pytest.raises(ValueError, match="rows do not sum"):
            WeightSchedule([np.array([[0.5, 0.4], [0.5, 0.5]])])

    def test_negative_entry_rejected(self):
        with pytest.raises(ValueError, match="negative"):
            WeightSchedule([np.array([[1.2, -0.2], [0.0, 1.0]])])

    def test_doubly_flag_checks_columns(self):
        G = np.array([[1.0, 0.0], [0.5, 0.5]])  # row stochastic only
        WeightSchedule([G])  # fine without the flag
        with pytest.raises(ValueError, match="columns"):
            WeightSchedule([G], doubly=True)

    def test_periodic_wraps_nonperiodic_raises(self):
        A = np.eye(2)
        B = np.full((2, 2), 0.5)
        per = WeightSchedule([A, B], periodic=True)
        np.testing.assert_array_equal(per.matrix_at(2), A)
        fin = WeightSchedule([A, B], periodic=False)
        with pytest.raises(IndexError):
            fin.matrix_at(2)

    def test_power_weights_identity_and_square(self):
        sched = metropolis_weights(path_graph(3))
        G = sched.matrices[0]
        np.testing.assert_array_equal(power_weights(sched, 0), np.eye(3))
        np.testing.assert_allclose(power_weights(sched, 2), G @ G, atol=1e-15)

    def test_power_weights_needs_constant_schedule(self):
        sched = WeightSchedule([np.eye(2), np.full((2, 2), 0.5)])
        with pytest.raises(ValueError):
            power_weights(sched, 2)

    def test_joint_connectivity_periodic_union(self):
        # neither round is connected alone; the union over a period is
        m = 3
        A = np.eye(m)
        A[:2, :2] = 0.5
        B = np.eye(m)
        B[1:, 1:] = 0.5
        sched = WeightSchedule([A, B], periodic=True, tau=2)
        assert check_joint_connectivity(sched)
        lonely = WeightSchedule([A], periodic=True, tau=1)
        assert not check_joint_connectivity(lonely)


class TestRoundLedger:
    def test_totals_and_rounds(self):
        led = RoundLedger()
        led.record_round({(0, 1): 2, (1, 0): 2})
        led.record_round({(0, 1): 2, (1, 0): 2}, repeat=9)
        assert led.total == 40
        assert led.n_rounds == 10
        assert len(led.runs) == 1  # identical rounds compress into one run

    def test_distinct_rounds_do_not_merge(self):
        led = RoundLedger()
        led.record_round({(0, 1): 1})
        led.record_round({(0, 1): 3})
        assert len(led.runs) == 2
        assert led.total == 4

    def test_zero_counts_dropped(self):
        led = RoundLedger()
        led.record_round({(0, 1): 0, (1, 2): 5})
        assert led.runs[0][0] == {(1, 2): 5}

    def test_cumulative_expands_runs(self):
        led = RoundLedger()
        led.record_round({(0, 1): 2}, repeat=3)
        led.record_round({(0, 1): 7})
        np.testing.assert_array_equal(led.cumulative(), [2, 4, 6, 13])

    def test_negative_count_rejected(self):
        led = RoundLedger()
        with pytest.raises(ValueError):
            led.record_round({(0, 1): -1})

    def test_bad_repeat_rejected(self):
        led = RoundLedger()
        with pytest.raises(ValueError):
            led.record_round({(0, 1): 1}, repeat=0)
