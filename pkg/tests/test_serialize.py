"""JSON round-trips for problems and graphs."""

import numpy as np
import pytest

from netopt.generators import gen_control_dccc, gen_satellite_ccdc
from netopt.network import path_graph, star_graph
from netopt.problems import Box, Polyhedron, ProblemDCx, QuadCost
from netopt.serialize import (
    fingerprint,
    graph_from_dict,
    graph_to_dict,
    load_graph,
    load_problem,
    problem_from_dict,
    problem_to_dict,
    save_graph,
    save_problem,
)


def assert_same_problem(a, b):
    assert fingerprint(a) == fingerprint(b)
    assert type(a) is type(b)


class TestRoundTrips:
    def test_dcx(self, toy_dcx, tmp_path):
        path = tmp_path / "p.json"
        save_problem(toy_dcx, path)
        back = load_problem(path)
        assert_same_problem(toy_dcx, back)
        np.testing.assert_array_equal(back.costs[0].H, toy_dcx.costs[0].H)
        np.testing.assert_array_equal(
            back.common_set.lower, toy_dcx.common_set.lower
        )

    def test_dccc_with_polyhedra_and_blocks(self, tmp_path):
        problem, _ = gen_control_dccc(3, 4, n=2, m=1, p=1, seed=2)
        path = tmp_path / "c.json"
        save_problem(problem, path)
        back = load_problem(path)
        assert_same_problem(problem, back)
        assert len(back.row_blocks) == len(problem.row_blocks)
        for x, y in zip(back.row_blocks, problem.row_blocks):
            assert x.owner == y.owner
            assert x.neighbors == y.neighbors
            np.testing.assert_array_equal(x.rows, y.rows)
        s0, s1 = problem.local_sets[0], back.local_sets[0]
        np.testing.assert_array_equal(s0.A, s1.A)
        np.testing.assert_array_equal(s0.interior, s1.interior)

    def test_ccdc_preserves_structural_zeros(self, tmp_path):
        problem, _ = gen_satellite_ccdc(6, 0.5)
        back = problem_from_dict(problem_to_dict(problem))
        assert_same_problem(problem, back)
        for i in range(6):
            for j in range(6):
                assert (problem.blocks[i][j] is None) == (back.blocks[i][j] is None)
        assert back.constant == problem.constant

    def test_infinite_bounds_survive(self):
        prob = ProblemDCx(
            [QuadCost(np.eye(2), np.zeros(2))],
            Box(np.array([0.0, -np.inf]), np.array([np.inf, 1.0])),
        )
        back = problem_from_dict(problem_to_dict(prob))
        np.testing.assert_array_equal(back.common_set.lower, [0.0, -np.inf])
        np.testing.assert_array_equal(back.common_set.upper, [np.inf, 1.0])

    def test_graph(self, tmp_path):
        g = star_graph(5)
        path = tmp_path / "g.json"
        save_graph(g, path)
        back = load_graph(path)
        assert back.n_nodes == 5
        assert back.edges == g.edges

    def test_polyhedron_equality_pair(self):
        poly = Polyhedron(
            np.array([[1.0, 0.0], [-1.0, 0.0]]),
            np.array([1.0, 1.0]),
            np.array([0.0, 0.5]),
            A_eq=np.array([[0.0, 1.0]]),
            b_eq=np.array([0.5]),
        )
        prob = ProblemDCx([QuadCost(np.eye(2), np.zeros(2))], poly)
        back = problem_from_dict(problem_to_dict(prob))
        np.testing.assert_array_equal(back.common_set.A_eq, poly.A_eq)
        np.testing.assert_array_equal(back.common_set.b_eq, poly.b_eq)


class TestFingerprint:
    def test_insensitive_to_python_identity(self, toy_dcx):
        clone = problem_from_dict(problem_to_dict(toy_dcx))
        assert fingerprint(clone) == fingerprint(toy_dcx)

    def test_sensitive_to_data(self, toy_dcx):
        bumped = ProblemDCx(
            [QuadCost(c.H, c.q, c.c + 1e-9) for c in toy_dcx.costs],
            toy_dcx.common_set,
        )
        assert fingerprint(bumped) != fingerprint(toy_dcx)


class TestSchema:
    def test_unknown_schema_rejected(self, toy_dcx):
        d = problem_to_dict(toy_dcx)
        d["schema"] = "netopt-problem-v999"
        with pytest.raises(ValueError, match="schema"):
            problem_from_dict(d)

    def test_unknown_kind_rejected(self, toy_dcx):
        d = problem_to_dict(toy_dcx)
        d["kind"] = "quantic"
        with pytest.raises(ValueError):
            problem_from_dict(d)

    def test_graph_schema_rejected_for_problems(self, tmp_path):
        g = path_graph(3)
        p = tmp_path / "g.json"
        save_graph(g, p)
        with pytest.raises(ValueError):
            load_problem(p)

    def test_graph_dict_is_sorted_and_stable(self):
        g = star_graph(4)
        d1 = graph_to_dict(g)
        d2 = graph_to_dict(graph_from_dict(d1))
        assert d1 == d2
        assert d1["edges"] == sorted(d1["edges"])
