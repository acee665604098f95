"""Distributed solvers for networked quadratic programs.

Three problem classes (shared-variable, coupling-constrained, and
coupled-cost) with the decomposition algorithms that fit each, a
centralized oracle for verification, seeded instance generators, and an
experiment harness with deterministic tracing.
"""

from .blocks import (
    contraction_certificate,
    cooperative_jacobi_step,
    coord_descent_step,
    feasible_directions_step,
    gauss_seidel_step,
    greedy_coloring,
    jacobi_step,
    make_block_state,
)
from .consensus import (
    ConstantStep,
    HarmonicStep,
    default_alpha,
    dgp1_step,
    dgp2_step,
    disagreement,
    incremental_cycle,
    make_state,
)
from .duality import (
    DipSolver,
    dfg_init,
    dfg_step,
    dip_solve,
    ds_step,
    dual_hessian,
    dual_value_and_subgradient,
    ps_init,
    ps_step,
    smoothing_for,
    smoothing_lipschitz,
)
from .generators import (
    CWParams,
    gen_control_dccc,
    gen_coupled_cooperative,
    gen_mhe_dcx,
    gen_satellite_ccdc,
)
from .harness import (
    ExperimentConfig,
    bench_table,
    compare,
    compatible_algorithms,
    run_experiment,
)
from .network import (
    CommGraph,
    complete_graph,
    metropolis_weights,
    path_graph,
    ring_graph,
    star_graph,
)
from .oracle import solve_centralized
from .problems import (
    Box,
    Point,
    Polyhedron,
    ProblemCCDC,
    ProblemDCCC,
    ProblemDCx,
    QuadCost,
    evaluate,
)
from .qp import solve_local_qp
from .serialize import (
    fingerprint,
    load_graph,
    load_problem,
    save_graph,
    save_problem,
)
from .trace import RunTrace, TraceRow

__all__ = [
    "Box",
    "CWParams",
    "CommGraph",
    "ConstantStep",
    "DipSolver",
    "ExperimentConfig",
    "HarmonicStep",
    "Point",
    "Polyhedron",
    "ProblemCCDC",
    "ProblemDCCC",
    "ProblemDCx",
    "QuadCost",
    "RunTrace",
    "TraceRow",
    "bench_table",
    "compare",
    "compatible_algorithms",
    "complete_graph",
    "contraction_certificate",
    "cooperative_jacobi_step",
    "coord_descent_step",
    "default_alpha",
    "dfg_init",
    "dfg_step",
    "dgp1_step",
    "dgp2_step",
    "dip_solve",
    "disagreement",
    "ds_step",
    "dual_hessian",
    "dual_value_and_subgradient",
    "evaluate",
    "feasible_directions_step",
    "fingerprint",
    "gauss_seidel_step",
    "gen_control_dccc",
    "gen_coupled_cooperative",
    "gen_mhe_dcx",
    "gen_satellite_ccdc",
    "greedy_coloring",
    "incremental_cycle",
    "jacobi_step",
    "load_graph",
    "load_problem",
    "make_block_state",
    "make_state",
    "metropolis_weights",
    "path_graph",
    "ps_init",
    "ps_step",
    "ring_graph",
    "run_experiment",
    "save_graph",
    "save_problem",
    "smoothing_for",
    "smoothing_lipschitz",
    "solve_centralized",
    "solve_local_qp",
    "star_graph",
]
