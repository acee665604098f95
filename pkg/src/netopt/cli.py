"""Command line front end.

Subcommands: ``generate`` (seeded problem instances to JSON), ``oracle``
(centralized reference solve), ``run`` (one algorithm with CSV trace and
JSON summary), ``bench`` (the three benchmark tables), ``compare`` (rank
run summaries on one problem).

Exit codes: 0 for a completed run (Converged or MaxIter), 2 for usage or
data errors.
"""

from __future__ import annotations

import argparse
import json
import sys

from .generators import (
    CWParams,
    gen_control_dccc,
    gen_coupled_cooperative,
    gen_mhe_dcx,
    gen_satellite_ccdc,
)
from .harness import ExperimentConfig, bench_table, compare, run_experiment
from .network import complete_graph, path_graph, ring_graph, star_graph
from .oracle import solve_centralized
from .serialize import fingerprint, load_graph, load_problem, save_problem

_TOPOLOGIES = {
    "path": path_graph,
    "ring": ring_graph,
    "star": star_graph,
    "complete": complete_graph,
}


def _add_generate(sub):
    p = sub.add_parser("generate", help="write a seeded problem instance to JSON")
    p.add_argument("family", choices=["mhe", "control", "satellite", "coop"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output problem JSON path")
    p.add_argument("--agents", type=int, default=None, help="number of agents M")
    p.add_argument("--horizon", type=int, default=None, help="horizon N")
    p.add_argument("--state-dim", type=int, default=2)
    p.add_argument("--meas-dim", type=int, default=1, help="measurements per agent (mhe)")
    p.add_argument("--input-dim", type=int, default=1, help="inputs per agent (control)")
    p.add_argument("--coupling-dim", type=int, default=1,
                   help="coupled disturbance channels per agent (control)")
    p.add_argument("--noise", type=float, default=0.05, help="measurement noise (mhe)")
    p.add_argument("--sigma", type=float, default=1.0, help="input weight (satellite)")
    p.add_argument("--block-dim", type=int, default=2, help="per-agent dimension (coop)")
    p.add_argument("--rho", type=float, default=0.1, help="diagonal regularization (coop)")


def _add_run(sub):
    p = sub.add_parser("run", help="run one algorithm on a problem file")
    p.add_argument("algorithm")
    p.add_argument("--problem", required=True)
    p.add_argument("--graph", default=None,
                   help="graph JSON path or one of: " + ", ".join(_TOPOLOGIES))
    p.add_argument("--eps", type=float, default=1e-2)
    p.add_argument("--max-iter", type=int, default=10_000)
    p.add_argument("--stop", default="self",
                   choices=["self", "distance", "oracle", "cap"])
    p.add_argument("--mu", type=int, default=10, help="mixing rounds per dgp2 step")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--log-every", type=int, default=1)
    p.add_argument("--trace", default=None, help="trace CSV output path")
    p.add_argument("--summary", default=None, help="summary JSON output path")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="netopt")
    sub = ap.add_subparsers(dest="command", required=True)

    _add_generate(sub)

    p = sub.add_parser("oracle", help="solve a problem file centrally")
    p.add_argument("--problem", required=True)
    p.add_argument("--out", default=None, help="write objective and point as JSON")

    _add_run(sub)

    p = sub.add_parser("bench", help="emit one benchmark table")
    p.add_argument("table", type=int, choices=[1, 2, 3])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="also write the table as CSV here")

    p = sub.add_parser("compare", help="rank run summaries on one problem")
    p.add_argument("summaries", nargs="+", help="summary JSON files from `run`")
    p.add_argument("--expected", default=None,
                   help="comma-separated algorithm ids, fastest first")
    return ap


def _generate(args) -> int:
    m = args.agents
    if args.family == "mhe":
        problem, _ = gen_mhe_dcx(
            m or 5, args.horizon or 10, n=args.state_dim, p=args.meas_dim,
            seed=args.seed, noise_scale=args.noise,
        )
    elif args.family == "control":
        problem, _ = gen_control_dccc(
            M=m or 5, N=args.horizon or 10, n=args.state_dim,
            m=args.input_dim, p=args.coupling_dim, seed=args.seed,
        )
    elif args.family == "satellite":
        params = CWParams(N=args.horizon) if args.horizon else None
        problem, _ = gen_satellite_ccdc(m or 10, args.sigma, params)
    else:
        problem, _ = gen_coupled_cooperative(
            m or 5, d=args.block_dim, seed=args.seed, rho=args.rho,
        )
    save_problem(problem, args.out)
    print(f"{args.out}: {args.family} instance, fingerprint {fingerprint(problem)[:16]}")
    return 0


def _oracle(args) -> int:
    problem = load_problem(args.problem)
    sol = solve_centralized(problem)
    print(f"objective {sol.objective!r}  status {sol.status}")
    if args.out:
        payload = {
            "objective": sol.objective,
            "status": sol.status,
            "blocks": [b.tolist() for b in sol.point.blocks],
        }
        if sol.multipliers is not None:
            payload["multipliers"] = sol.multipliers.tolist()
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh)
            fh.write("\n")
    return 0


def _resolve_graph(spec, problem):
    if spec is None:
        return None
    if spec in _TOPOLOGIES:
        return _TOPOLOGIES[spec](problem.n_agents)
    return load_graph(spec)


def _run(args) -> int:
    problem = load_problem(args.problem)
    graph = _resolve_graph(args.graph, problem)
    config = ExperimentConfig(
        args.algorithm, eps=args.eps, max_iter=args.max_iter, seed=args.seed,
        stop=args.stop, mu=args.mu, log_every=args.log_every,
    )
    trace = run_experiment(problem, config, graph=graph)
    s = trace.summary
    if args.trace:
        trace.save(args.trace)
    if args.summary:
        trace.save_summary(args.summary)
    print(
        "%s: %s after %d iterations, objective %r, residual %.3e, gap %.3e"
        % (args.algorithm, s["status"], s["iterations"], s["final_objective"],
           s["final_residual"], s["oracle_gap"])
    )
    return 0


def _bench(args) -> int:
    table = bench_table(args.table, seed=args.seed)
    print(table.to_text(), end="")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(table.to_csv())
    return 0


class _SummaryTrace:
    """Adapter so saved summaries can feed ``compare`` like live traces."""

    def __init__(self, summary):
        self.summary = summary


def _compare(args) -> int:
    traces = []
    for path in args.summaries:
        with open(path, encoding="utf-8") as fh:
            traces.append(_SummaryTrace(json.load(fh)))
    expected = args.expected.split(",") if args.expected else None
    report = compare(traces, expected=expected)
    print("by iterations:", ", ".join(f"{a}={n}" for a, n in report["by_iterations"]))
    print("by messages:  ", ", ".join(f"{a}={n}" for a, n in report["by_messages"]))
    if report["ties"]:
        print("ties:", report["ties"])
    if report["violations"]:
        print("ordering violations:", report["violations"])
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "generate": _generate,
        "oracle": _oracle,
        "run": _run,
        "bench": _bench,
        "compare": _compare,
    }
    try:
        return handlers[args.command](args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
