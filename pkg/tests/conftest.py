"""Shared instances and cached oracle solutions."""

import numpy as np
import pytest

from netopt.generators import gen_coupled_cooperative, gen_mhe_dcx
from netopt.oracle import solve_centralized
from netopt.problems import Box, ProblemCCDC, ProblemDCCC, ProblemDCx, QuadCost


def make_allocation(seed, M=None, d=None, convex=0.5):
    """Coupling-constrained resource split: sum_i x^i = g over boxes.

    Every G_i is the identity, so the allocation-splitting method applies;
    ``convex`` adds that multiple of I to each Hessian (0.0 gives linear
    costs with H = 0).
    """
    rng = np.random.default_rng(seed)
    M = M if M is not None else 3 + seed % 8
    d = d if d is not None else 2 + seed % 3
    costs = []
    for _ in range(M):
        A = rng.normal(size=(d, d))
        H = A.T @ A + convex * np.eye(d) if convex else np.zeros((d, d))
        costs.append(QuadCost(H, rng.normal(size=d)))
    sets = [Box(-2.0 * np.ones(d), 2.0 * np.ones(d)) for _ in range(M)]
    couplings = [np.eye(d) for _ in range(M)]
    g = np.sum([rng.uniform(-0.5, 0.5, d) for _ in range(M)], axis=0)
    return ProblemDCCC(costs, sets, couplings, g)


@pytest.fixture(scope="session")
def toy_dcx():
    """Three agents sharing one 2-d variable over a box.

    f1 = (x1-1)^2 + x2^2, f2 = x1^2 + (x2-2)^2, f3 = |x|^2; the box is
    loose, so the optimum is the unconstrained mean (1/3, 2/3).
    """
    costs = [
        QuadCost(np.eye(2), np.array([-2.0, 0.0]), 1.0),
        QuadCost(np.eye(2), np.array([0.0, -4.0]), 4.0),
        QuadCost(np.eye(2), np.zeros(2)),
    ]
    return ProblemDCx(costs, Box(-5.0 * np.ones(2), 5.0 * np.ones(2)))


@pytest.fixture(scope="session")
def toy_dccc():
    return make_allocation(0, M=3, d=2)


@pytest.fixture(scope="session")
def toy_ccdc():
    problem, _ = gen_coupled_cooperative(4, d=2, seed=2, rho=4.0)
    return problem


@pytest.fixture(scope="session")
def tiny_mhe():
    problem, info = gen_mhe_dcx(4, 3, n=2, p=2, seed=3)
    return problem, info


@pytest.fixture(scope="session")
def oracle_cache():
    """Memoized centralized solves keyed by object identity."""
    cache = {}

    def solve(problem):
        key = id(problem)
        if key not in cache:
            cache[key] = solve_centralized(problem)
        return cache[key]

    return solve
