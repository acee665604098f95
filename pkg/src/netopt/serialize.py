"""JSON round-trip for problems and graphs.

Problem files carry the schema tag ``netopt-problem-v1`` and graph files
``netopt-graph-v1``.  Floats are written with full ``repr`` precision (the
stdlib json module does this by default), so save/load is lossless and a
fingerprint of the canonical dump identifies an instance exactly.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

from .network import CommGraph
from .problems import (
    Box,
    Polyhedron,
    ProblemCCDC,
    ProblemDCCC,
    ProblemDCx,
    QuadCost,
    RowBlock,
)

PROBLEM_SCHEMA = "netopt-problem-v1"
GRAPH_SCHEMA = "netopt-graph-v1"


def _arr(a):
    return np.asarray(a, dtype=float).tolist()


def _cost_to_dict(cost: QuadCost) -> dict:
    return {"H": _arr(cost.H), "q": _arr(cost.q), "c": cost.c}


def _cost_from_dict(d) -> QuadCost:
    return QuadCost(np.array(d["H"], dtype=float), np.array(d["q"], dtype=float), d["c"])


def _set_to_dict(s) -> dict:
    if isinstance(s, Box):
        return {"type": "box", "lower": _arr(s.lower), "upper": _arr(s.upper)}
    if isinstance(s, Polyhedron):
        d = {
            "type": "polyhedron",
            "A": _arr(s.A),
            "b": _arr(s.b),
            "interior": _arr(s.interior),
        }
        if s.A_eq is not None:
            d["A_eq"] = _arr(s.A_eq)
            d["b_eq"] = _arr(s.b_eq)
        return d
    raise TypeError(f"cannot serialize set of type {type(s).__name__}")


def _set_from_dict(d):
    if d["type"] == "box":
        return Box(np.array(d["lower"], dtype=float), np.array(d["upper"], dtype=float))
    if d["type"] == "polyhedron":
        kwargs = {}
        if "A_eq" in d:
            kwargs["A_eq"] = np.array(d["A_eq"], dtype=float)
            kwargs["b_eq"] = np.array(d["b_eq"], dtype=float)
        return Polyhedron(
            np.array(d["A"], dtype=float),
            np.array(d["b"], dtype=float),
            np.array(d["interior"], dtype=float),
            **kwargs,
        )
    raise ValueError(f"unknown set type {d['type']!r}")


def problem_to_dict(problem) -> dict:
    """Serialize any of the three problem classes to a JSON-safe dict."""
    if isinstance(problem, ProblemDCx):
        return {
            "schema": PROBLEM_SCHEMA,
            "kind": "dcx",
            "costs": [_cost_to_dict(c) for c in problem.costs],
            "common_set": _set_to_dict(problem.common_set),
        }
    if isinstance(problem, ProblemDCCC):
        d = {
            "schema": PROBLEM_SCHEMA,
            "kind": "dccc",
            "costs": [_cost_to_dict(c) for c in problem.costs],
            "local_sets": [_set_to_dict(s) for s in problem.local_sets],
            "couplings": [_arr(G) for G in problem.couplings],
            "rhs": _arr(problem.rhs),
        }
        if problem.row_blocks is not None:
            d["row_blocks"] = [
                {
                    "owner": rb.owner,
                    "rows": [int(r) for r in rb.rows],
                    "neighbors": list(rb.neighbors),
                }
                for rb in problem.row_blocks
            ]
        return d
    if isinstance(problem, ProblemCCDC):
        return {
            "schema": PROBLEM_SCHEMA,
            "kind": "ccdc",
            "blocks": [
                [None if B is None else _arr(B) for B in row] for row in problem.blocks
            ],
            "linear": [_arr(q) for q in problem.linear],
            "local_sets": [_set_to_dict(s) for s in problem.local_sets],
            "constant": problem.constant,
        }
    raise TypeError(f"cannot serialize problem of type {type(problem).__name__}")


def problem_from_dict(d: dict):
    if d.get("schema") != PROBLEM_SCHEMA:
        raise ValueError(f"expected schema {PROBLEM_SCHEMA!r}, got {d.get('schema')!r}")
    kind = d["kind"]
    if kind == "dcx":
        return ProblemDCx(
            [_cost_from_dict(c) for c in d["costs"]],
            _set_from_dict(d["common_set"]),
        )
    if kind == "dccc":
        row_blocks = None
        if "row_blocks" in d:
            row_blocks = [
                RowBlock(rb["owner"], np.array(rb["rows"], dtype=int), tuple(rb["neighbors"]))
                for rb in d["row_blocks"]
            ]
        return ProblemDCCC(
            [_cost_from_dict(c) for c in d["costs"]],
            [_set_from_dict(s) for s in d["local_sets"]],
            [np.array(G, dtype=float) for G in d["couplings"]],
            np.array(d["rhs"], dtype=float),
            row_blocks=row_blocks,
        )
    if kind == "ccdc":
        return ProblemCCDC(
            [
                [None if B is None else np.array(B, dtype=float) for B in row]
                for row in d["blocks"]
            ],
            [np.array(q, dtype=float) for q in d["linear"]],
            [_set_from_dict(s) for s in d["local_sets"]],
            constant=d.get("constant", 0.0),
        )
    raise ValueError(f"unknown problem kind {kind!r}")


def save_problem(problem, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(problem_to_dict(problem), fh)
        fh.write("\n")


def load_problem(path):
    with open(path, encoding="utf-8") as fh:
        return problem_from_dict(json.load(fh))


def graph_to_dict(graph: CommGraph) -> dict:
    return {
        "schema": GRAPH_SCHEMA,
        "n_nodes": graph.n_nodes,
        "edges": sorted([int(i), int(j)] for i, j in graph.edges),
    }


def graph_from_dict(d: dict) -> CommGraph:
    if d.get("schema") != GRAPH_SCHEMA:
        raise ValueError(f"expected schema {GRAPH_SCHEMA!r}, got {d.get('schema')!r}")
    return CommGraph(d["n_nodes"], [tuple(e) for e in d["edges"]])


def save_graph(graph: CommGraph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(graph_to_dict(graph), fh)
        fh.write("\n")


def load_graph(path) -> CommGraph:
    with open(path, encoding="utf-8") as fh:
        return graph_from_dict(json.load(fh))


def fingerprint(problem) -> str:
    """Stable hex digest identifying a problem instance bit-for-bit."""
    dump = json.dumps(problem_to_dict(problem), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(dump.encode("utf-8")).hexdigest()
