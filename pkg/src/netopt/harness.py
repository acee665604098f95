"""Experiment runner: algorithm x problem with tracing and oracle checks.

``run_experiment`` drives any of the implemented algorithms on a compatible
problem, records one trace row per outer iteration, and verifies the final
point against the centralized oracle so runs never grade themselves.
``bench_table`` reproduces the three benchmark table layouts on seeded
instances.

Iteration counting: one row per outer iteration of the algorithm.  A dgp2
iteration is one gradient step plus ``mu`` mixing rounds; the extra rounds
show up in the cumulative message column, not in the iteration count.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import blocks as blk
from . import consensus as cns
from . import duality as dual
from .network import CommGraph, RoundLedger, metropolis_weights, path_graph
from .oracle import solve_centralized
from .problems import ProblemCCDC, ProblemDCCC, ProblemDCx, evaluate
from .serialize import fingerprint
from .trace import STATUS_CONVERGED, STATUS_MAXITER, RunTrace

DCX_ALGORITHMS = ("dgp1", "dgp2", "incremental")
DCCC_ALGORITHMS = ("ps", "ds", "dfg", "dip")
CCDC_ALGORITHMS = (
    "jacobi",
    "gauss_seidel",
    "coord_descent",
    "cooperative_jacobi",
    "feasible_directions",
)

STOP_MODES = ("self", "distance", "oracle", "cap")


class IncompatibleAlgorithm(ValueError):
    """Raised when an algorithm id does not fit the problem class."""


def problem_kind(problem) -> str:
    if isinstance(problem, ProblemDCx):
        return "dcx"
    if isinstance(problem, ProblemDCCC):
        return "dccc"
    if isinstance(problem, ProblemCCDC):
        return "ccdc"
    raise TypeError(f"unsupported problem type {type(problem).__name__}")


def compatible_algorithms(problem) -> tuple:
    """Algorithm ids that can run on this problem.

    Allocation splitting keeps every iterate feasible by handing each agent
    an equality target for its own coupling share, so it needs every G_i to
    have full row rank; rank-deficient couplings exclude it.
    """
    kind = problem_kind(problem)
    if kind == "dcx":
        return DCX_ALGORITHMS
    if kind == "ccdc":
        return CCDC_ALGORITHMS
    algs = ["ds", "dfg", "dip"]
    if all(
        G.shape[0] <= G.shape[1] and np.linalg.matrix_rank(G) == G.shape[0]
        for G in problem.couplings
    ):
        algs.insert(0, "ps")
    return tuple(algs)


@dataclass
class ExperimentConfig:
    """Everything a run needs besides the problem itself.

    ``stop`` selects the termination rule:

    * ``"self"``     -- quantities the algorithm can observe (movement,
                        disagreement, primal-dual gap);
    * ``"distance"`` -- distance to the oracle point <= eps;
    * ``"oracle"``   -- |objective - oracle| <= eps and residual <= eps;
    * ``"cap"``      -- always run to ``max_iter``.
    """

    algorithm: str
    eps: float = 1e-3
    max_iter: int = 10_000
    seed: int = 0
    stop: str = "self"
    mu: int = 10
    step: tuple = (1.0, 1.0)
    weights: np.ndarray | None = None
    log_every: int = 1

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.stop not in STOP_MODES:
            raise ValueError(f"stop must be one of {STOP_MODES}")
        if self.mu < 1:
            raise ValueError("mu must be at least 1")
        if self.log_every < 1:
            raise ValueError("log_every must be at least 1")
        known = DCX_ALGORITHMS + DCCC_ALGORITHMS + CCDC_ALGORITHMS
        if self.algorithm not in known:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")


@dataclass
class _Metrics:
    objective: float
    residual: float
    distance: float | None
    dual_value: float | None
    movement: float
    gap_like: float


def _stop_hit(config, metrics, ref_objective) -> bool:
    if config.stop == "cap":
        return False
    if config.stop == "distance":
        return metrics.distance is not None and metrics.distance <= config.eps
    if config.stop == "oracle":
        return (
            abs(metrics.objective - ref_objective) <= config.eps
            and metrics.residual <= config.eps
        )
    return metrics.gap_like <= config.eps


def _max_block_distance(xs, ref_blocks) -> float:
    return max(
        float(np.linalg.norm(np.asarray(a) - b)) for a, b in zip(xs, ref_blocks)
    )


def _ccdc_sweep_messages(problem: ProblemCCDC) -> int:
    """Scalars exchanged when every agent refreshes its neighbors' blocks."""
    dims = problem.dims
    total = 0
    for i in range(problem.n_agents):
        for j in range(problem.n_agents):
            if i != j and problem.mask[i][j]:
                total += dims[j]
    return int(total)


def run_experiment(problem, config: ExperimentConfig, graph: CommGraph | None = None,
                   reference=None) -> RunTrace:
    """Run one algorithm until its stop rule fires or the cap is reached.

    Returns a :class:`RunTrace` whose summary includes an independent oracle
    check of the final point (objective gap and coupling residual), so a
    ``Converged`` status can always be audited against it.
    """
    kind = problem_kind(problem)
    if config.algorithm not in compatible_algorithms(problem):
        raise IncompatibleAlgorithm(
            f"{config.algorithm!r} cannot run on a {kind} problem"
        )
    if reference is None:
        reference = solve_centralized(problem)
    t0 = time.perf_counter()

    if kind == "dcx":
        trace, status = _run_dcx(problem, config, graph, reference)
    elif kind == "dccc":
        trace, status = _run_dccc(problem, config, reference)
    else:
        trace, status = _run_ccdc(problem, config, reference)

    elapsed = time.perf_counter() - t0
    last = trace.rows[-1]
    gap = abs(last.objective - reference.objective)
    trace.summary.update({
        "algorithm": config.algorithm,
        "problem": fingerprint(problem),
        "kind": kind,
        "eps": config.eps,
        "stop": config.stop,
        "seed": config.seed,
        "status": status,
        "iterations": last.iteration,
        "messages": last.messages,
        "final_objective": last.objective,
        "final_residual": last.residual,
        "final_distance": last.distance,
        "oracle_objective": reference.objective,
        "oracle_gap": gap,
        "oracle_ok": bool(gap <= config.eps and last.residual <= config.eps),
        "elapsed_s": elapsed,
    })
    return trace


# ---------------------------------------------------------------------------
# per-class drivers


def _log(trace, config, k, m: _Metrics, messages, force=False):
    if force or k % config.log_every == 0:
        trace.record(k, m.objective, m.residual, m.distance, m.dual_value, messages)


def _run_dcx(problem, config, graph, ref):
    if graph is None:
        graph = path_graph(problem.n_agents)
    schedule = metropolis_weights(graph)
    gamma = schedule.matrices[0]
    ref_x = ref.point.blocks[0]
    ledger = RoundLedger()
    rule = cns.HarmonicStep(*config.step)
    trace = RunTrace()
    status = STATUS_MAXITER

    if config.algorithm == "incremental":
        state = cns.CycleState(problem.common_set.interior_point(), 0)
        order = list(range(problem.n_agents))
        prev = state.z.copy()
        for k in range(1, config.max_iter + 1):
            state = cns.incremental_cycle(problem, order, state, rule, ledger)
            obj = sum(c.value(state.z) for c in problem.costs)
            move = float(np.linalg.norm(state.z - prev))
            prev = state.z.copy()
            m = _Metrics(obj, 0.0, float(np.linalg.norm(state.z - ref_x)),
                         None, move, move)
            hit = _stop_hit(config, m, ref.objective)
            _log(trace, config, k, m, ledger.total, force=hit or k == config.max_iter)
            if hit:
                status = STATUS_CONVERGED
                break
        return trace, status

    state = cns.make_state(problem)
    if config.algorithm == "dgp2":
        alpha = cns.default_alpha(problem)
        gamma_mu = np.linalg.matrix_power(gamma, config.mu)
    prev_mean = state.mean().copy()
    # the objective is the one per-iteration cost that is not O(M n); pay
    # for it only on logged rows and when the stop rule reads it
    for k in range(1, config.max_iter + 1):
        if config.algorithm == "dgp1":
            state = cns.dgp1_step(problem, schedule, state, rule, ledger)
        else:
            state = cns.dgp2_step(problem, gamma, state, alpha, mu=config.mu,
                                  ledger=ledger, gamma_power=gamma_mu)
        mean = state.mean()
        resid = cns.disagreement(state.x)
        dist = float(np.max(np.linalg.norm(state.x - ref_x, axis=1)))
        move = float(np.linalg.norm(mean - prev_mean))
        prev_mean = mean.copy()
        obj = None
        if config.stop == "oracle":
            obj = sum(c.value(mean) for c in problem.costs)
        m = _Metrics(np.nan if obj is None else obj, resid, dist, None, move,
                     max(resid, move))
        hit = _stop_hit(config, m, ref.objective)
        if hit or k == config.max_iter or k % config.log_every == 0:
            if obj is None:
                obj = sum(c.value(mean) for c in problem.costs)
            trace.record(k, obj, resid, dist, None, ledger.total)
        if hit:
            status = STATUS_CONVERGED
            break
    return trace, status


def _dccc_metrics(problem, xs, dual_value, ref, prev_obj):
    obj, resid_vec = evaluate(problem, xs)
    resid = float(np.linalg.norm(resid_vec))
    dist = _max_block_distance(xs, ref.point.blocks)
    if dual_value is None or not np.isfinite(dual_value):
        gap_like = np.inf
        dual_value = None
    else:
        gap_like = max(resid, abs(obj - dual_value) / max(1.0, abs(dual_value)))
    move = abs(obj - prev_obj)
    return _Metrics(obj, resid, dist, dual_value, move, gap_like), obj


def _run_dccc(problem, config, ref):
    trace = RunTrace()
    status = STATUS_MAXITER
    ledger = RoundLedger()

    if config.algorithm == "dip":
        solver = dual.DipSolver(problem, eps=config.eps, max_newton=config.max_iter)
        rows = []

        def callback(total, lam, val, grad, mu, xs):
            obj, resid_vec = evaluate(problem, xs)
            dist = _max_block_distance(xs, ref.point.blocks)
            rows.append((total, obj, float(np.linalg.norm(resid_vec)), dist, val))

        result = solver.solve(callback=callback)
        per_iter = dual.gather_scatter_counts(problem)
        per_iter = sum(per_iter.values())
        for total, obj, resid, dist, val in rows:
            if total % config.log_every == 0 or total == rows[-1][0]:
                trace.record(total, obj, resid, dist, val, total * per_iter)
        if not trace.rows:
            obj, resid_vec = evaluate(problem, result.xs)
            trace.record(result.iterations or 1, obj,
                         float(np.linalg.norm(resid_vec)),
                         _max_block_distance(result.xs, ref.point.blocks),
                         result.value, per_iter)
        trace.summary["solver_status"] = result.status
        trace.summary["stages"] = [[mu, n] for mu, n in result.stages]
        status = STATUS_CONVERGED if result.status == "optimal" else STATUS_MAXITER
        return trace, status

    if config.algorithm == "ps":
        state = dual.ps_init(problem)
        rule = cns.HarmonicStep(*config.step)
        prev_t = state.t.copy()
        prev_obj = np.inf
        for k in range(1, config.max_iter + 1):
            state = dual.ps_step(problem, state, rule, ledger=ledger)
            move = float(np.abs(state.t - prev_t).max(initial=0.0))
            prev_t = state.t.copy()
            m, prev_obj = _dccc_metrics(problem, state.xs, None, ref, prev_obj)
            m = replace(m, movement=move, gap_like=move)
            hit = _stop_hit(config, m, ref.objective)
            _log(trace, config, k, m, ledger.total, force=hit or k == config.max_iter)
            if hit:
                status = STATUS_CONVERGED
                break
        return trace, status

    if config.algorithm == "ds":
        state = dual.DualState(np.zeros(problem.rhs.size))
        alpha = dual.ds_default_alpha(problem)
        prev_obj = np.inf
        for k in range(1, config.max_iter + 1):
            state = dual.ds_step(problem, state, alpha, ledger=ledger)
            m, prev_obj = _dccc_metrics(problem, state.xs, state.value, ref, prev_obj)
            hit = _stop_hit(config, m, ref.objective)
            _log(trace, config, k, m, ledger.total, force=hit or k == config.max_iter)
            if hit:
                status = STATUS_CONVERGED
                break
        return trace, status

    # dfg: accuracy target eps fixes the smoothing weight up front
    mu = dual.smoothing_for(problem, config.eps)
    lip = dual.smoothing_lipschitz(problem, mu)
    state = dual.dfg_init(problem)
    prev_obj = np.inf
    for k in range(1, config.max_iter + 1):
        state = dual.dfg_step(problem, state, mu, lip, ledger=ledger)
        m, prev_obj = _dccc_metrics(problem, state.xs, state.value_bar, ref, prev_obj)
        hit = _stop_hit(config, m, ref.objective)
        _log(trace, config, k, m, ledger.total, force=hit or k == config.max_iter)
        if hit:
            status = STATUS_CONVERGED
            break
    return trace, status


def _run_ccdc(problem, config, ref):
    trace = RunTrace()
    status = STATUS_MAXITER
    state = blk.make_block_state(problem)
    sweep_msgs = _ccdc_sweep_messages(problem)
    rng = np.random.default_rng(config.seed)
    M = problem.n_agents
    weights = config.weights
    if config.algorithm == "cooperative_jacobi" and weights is None:
        weights = np.full(M, 1.0 / M)
    colors = None
    if config.algorithm == "gauss_seidel":
        colors = blk.greedy_coloring(problem.mask)
    messages = 0
    prev_obj = np.inf
    for k in range(1, config.max_iter + 1):
        old = state.copy_blocks()
        if config.algorithm == "jacobi":
            state = blk.jacobi_step(problem, state)
            messages += sweep_msgs
        elif config.algorithm == "gauss_seidel":
            state = blk.gauss_seidel_step(problem, state, colors=colors)
            messages += sweep_msgs
        elif config.algorithm == "coord_descent":
            state = blk.coord_descent_step(problem, state, rng)
            messages += max(1, sweep_msgs // M)
        elif config.algorithm == "cooperative_jacobi":
            state = blk.cooperative_jacobi_step(problem, state, weights)
            messages += sweep_msgs
        else:
            state, _ = blk.feasible_directions_step(problem, state)
            messages += sweep_msgs
        obj, _ = evaluate(problem, state.x)
        move = max(
            float(np.linalg.norm(a - b)) for a, b in zip(state.x, old)
        )
        dist = _max_block_distance(state.x, ref.point.blocks)
        m = _Metrics(obj, 0.0, dist, None, move, move)
        prev_obj = obj
        hit = _stop_hit(config, m, ref.objective)
        _log(trace, config, k, m, messages, force=hit or k == config.max_iter)
        if hit:
            status = STATUS_CONVERGED
            break
    return trace, status


# ---------------------------------------------------------------------------
# benchmark tables


@dataclass
class BenchTable:
    title: str
    header: list
    rows: list = field(default_factory=list)

    def to_csv(self) -> str:
        lines = [",".join(self.header)]
        lines += [",".join(str(c) for c in row) for row in self.rows]
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        cols = [self.header] + [[str(c) for c in row] for row in self.rows]
        widths = [max(len(r[j]) for r in cols) for j in range(len(self.header))]
        out = [self.title]
        out.append("  ".join(h.ljust(w) for h, w in zip(self.header, widths)))
        out.append("  ".join("-" * w for w in widths))
        for row in self.rows:
            out.append("  ".join(str(c).ljust(w) for c, w in zip(row, widths)))
        return "\n".join(out) + "\n"


NOT_REPRODUCIBLE_NOTE = (
    "random instances; iteration counts are seed-dependent, only orderings "
    "and trends are stable"
)


def bench_table(table_id: int, seed: int = 0) -> BenchTable:
    """Reproduce one of the three benchmark table layouts on seeded instances."""
    if table_id == 1:
        return _bench_mhe(seed)
    if table_id == 2:
        return _bench_control(seed)
    if table_id == 3:
        return _bench_satellite(seed)
    raise ValueError("table_id must be 1, 2 or 3")


def _bench_mhe(seed: int) -> BenchTable:
    from .generators import gen_mhe_dcx

    table = BenchTable(
        f"estimation, eps=1e-2, mu=10 ({NOT_REPRODUCIBLE_NOTE})",
        ["M", "N", "dgp1_iters", "dgp2_iters", "dgp2_msgs_per_iter"],
    )
    for M, N in [(10, 10), (10, 20), (20, 10), (20, 20)]:
        problem, _ = gen_mhe_dcx(
            M, N, n=2, p=3, seed=seed + 1000 + M + N, noise_scale=0.05,
            q_weight=4.0, r_weight=2.0, center_shift=1.0, angle=1.1,
        )
        ref = solve_centralized(problem)
        t1 = run_experiment(problem, ExperimentConfig(
            "dgp1", eps=1e-2, max_iter=200_000, stop="distance", log_every=1000,
        ), reference=ref)
        t2 = run_experiment(problem, ExperimentConfig(
            "dgp2", eps=1e-2, max_iter=200_000, stop="distance", mu=10,
            log_every=100,
        ), reference=ref)
        msgs_per = t2.summary["messages"] // t2.summary["iterations"]
        table.rows.append([M, N, t1.summary["iterations"],
                           t2.summary["iterations"], msgs_per])
    return table


def _bench_control(seed: int) -> BenchTable:
    from .generators import gen_control_dccc

    table = BenchTable(
        f"control, M=10 ({NOT_REPRODUCIBLE_NOTE})",
        ["N", "ds", "dfg", "dip"],
    )
    for N in (10, 20, 30):
        problem, _ = gen_control_dccc(M=10, N=N, n=5, m=3, p=2, seed=seed + 42)
        ref = solve_centralized(problem)
        ds = run_experiment(problem, ExperimentConfig(
            "ds", eps=1e-12, max_iter=5000, stop="cap", log_every=100,
        ), reference=ref)
        achieved = max(
            ds.summary["final_residual"],
            ds.summary["oracle_gap"] / max(1.0, abs(ref.objective)),
        )
        dfg = run_experiment(problem, ExperimentConfig(
            "dfg", eps=1e-2, max_iter=20_000, stop="self", log_every=10,
        ), reference=ref)
        dip = run_experiment(problem, ExperimentConfig(
            "dip", eps=1e-4, max_iter=2000,
        ), reference=ref)
        table.rows.append([
            N,
            "%d (%.2g)" % (ds.summary["iterations"], achieved),
            "%d (1e-02)" % dfg.summary["iterations"],
            "%d (1e-04)" % dip.summary["iterations"],
        ])
    return table


def _bench_satellite(seed: int) -> BenchTable:
    from .generators import CWParams, gen_satellite_ccdc

    del seed  # the formation instance is deterministic
    table = BenchTable(
        "satellite formation, M=10, N=40, eps=1e-3",
        ["sigma", "jacobi", "gauss_seidel"],
    )
    for sigma in (0.1, 1.0, 10.0):
        problem, _ = gen_satellite_ccdc(10, sigma, CWParams(N=40))
        ref = solve_centralized(problem)
        j = run_experiment(problem, ExperimentConfig(
            "jacobi", eps=1e-3, max_iter=100_000, stop="distance",
        ), reference=ref)
        gs = run_experiment(problem, ExperimentConfig(
            "gauss_seidel", eps=1e-3, max_iter=100_000, stop="distance",
        ), reference=ref)
        table.rows.append([sigma, j.summary["iterations"], gs.summary["iterations"]])
    return table


# ---------------------------------------------------------------------------
# trace comparison


def compare(traces, expected=None) -> dict:
    """Rank runs on one problem by iterations and messages to termination.

    ``expected`` optionally lists algorithm ids fastest-first; any pair out
    of order by iteration count is reported under ``"violations"``.
    """
    if len(traces) < 2:
        raise ValueError("need at least two traces to compare")
    prints = {t.summary.get("problem") for t in traces}
    if len(prints) != 1:
        raise ValueError("traces come from different problems")
    by_iter = sorted(
        (t.summary["algorithm"], t.summary["iterations"]) for t in traces
    )
    by_iter.sort(key=lambda p: p[1])
    by_msgs = sorted(
        (t.summary["algorithm"], t.summary["messages"]) for t in traces
    )
    by_msgs.sort(key=lambda p: p[1])
    ties = [
        (a1, a2)
        for (a1, n1), (a2, n2) in zip(by_iter, by_iter[1:])
        if n1 == n2
    ]
    violations = []
    if expected is not None:
        counts = {t.summary["algorithm"]: t.summary["iterations"] for t in traces}
        for fast, slow in zip(expected, expected[1:]):
            if fast in counts and slow in counts and counts[fast] > counts[slow]:
                violations.append((fast, slow))
    return {
        "problem": prints.pop(),
        "by_iterations": by_iter,
        "by_messages": by_msgs,
        "ties": ties,
        "violations": violations,
    }
