"""Communication graphs, consensus weight schedules and message accounting.

Edges are ordered pairs ``(i, j)`` meaning "j sends to i". Agents are
indexed from 0. Time-varying communication is represented by a finite list
of weight matrices, cycled periodically when ``periodic`` is set.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ROW_TOL = 1e-12


@dataclass(frozen=True)
class CommGraph:
    n_nodes: int
    edges: frozenset

    def __init__(self, n_nodes, edges):
        n_nodes = int(n_nodes)
        if n_nodes < 1:
            raise ValueError("graph needs at least one node")
        cleaned = set()
        for i, j in edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError("self loops are implicit; do not list them")
            if not (0 <= i < n_nodes and 0 <= j < n_nodes):
                raise ValueError(f"edge ({i},{j}) out of range")
            cleaned.add((i, j))
        object.__setattr__(self, "n_nodes", n_nodes)
        object.__setattr__(self, "edges", frozenset(cleaned))

    def is_symmetric(self) -> bool:
        return all((j, i) in self.edges for i, j in self.edges)

    def undirected_pairs(self) -> set:
        return {(min(i, j), max(i, j)) for i, j in self.edges}

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_nodes, dtype=int)
        for a, b in self.undirected_pairs():
            deg[a] += 1
            deg[b] += 1
        return deg

    def neighbors(self, i) -> set:
        out = set()
        for a, b in self.edges:
            if a == i:
                out.add(b)
            elif b == i:
                out.add(a)
        return out

    def is_connected(self) -> bool:
        return _connected(self.n_nodes, self.undirected_pairs())

    def diameter(self) -> int:
        """Longest shortest path over the undirected skeleton (BFS per node)."""
        if not self.is_connected():
            return -1
        adj = [[] for _ in range(self.n_nodes)]
        for a, b in self.undirected_pairs():
            adj[a].append(b)
            adj[b].append(a)
        diam = 0
        for s in range(self.n_nodes):
            dist = {s: 0}
            queue = [s]
            while queue:
                u = queue.pop(0)
                for v in adj[u]:
                    if v not in dist:
                        dist[v] = dist[u] + 1
                        queue.append(v)
            diam = max(diam, max(dist.values()))
        return diam


def _connected(n, pairs) -> bool:
    if n == 1:
        return True
    if not pairs:
        return False
    adj = [[] for _ in range(n)]
    for a, b in pairs:
        adj[a].append(b)
        adj[b].append(a)
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == n


def path_graph(m: int) -> CommGraph:
    return CommGraph(m, {(i, i + 1) for i in range(m - 1)} | {(i + 1, i) for i in range(m - 1)})


def ring_graph(m: int) -> CommGraph:
    if m < 3:
        return path_graph(m)
    e = set()
    for i in range(m):
        j = (i + 1) % m
        e.add((i, j))
        e.add((j, i))
    return CommGraph(m, e)


def complete_graph(m: int) -> CommGraph:
    return CommGraph(m, {(i, j) for i in range(m) for j in range(m) if i != j})


def star_graph(m: int) -> CommGraph:
    return CommGraph(m, {(0, i) for i in range(1, m)} | {(i, 0) for i in range(1, m)})


BUILTIN_GRAPHS = {
    "path": path_graph,
    "ring": ring_graph,
    "complete": complete_graph,
    "star": star_graph,
}


@dataclass
class WeightSchedule:
    """A (possibly periodic) sequence of consensus weight matrices.

    Every matrix must be row stochastic with nonnegative entries; set
    ``doubly`` to also enforce column stochasticity. ``tau`` is the bounded
    interconnectivity interval used by joint-connectivity checks (defaults
    to the period length).
    """

    matrices: list
    periodic: bool = True
    doubly: bool = False
    tau: int | None = None

    def __post_init__(self):
        if not self.matrices:
            raise ValueError("schedule needs at least one matrix")
        mats = []
        m = None
        for k, G in enumerate(self.matrices):
            G = np.asarray(G, dtype=float)
            if G.ndim != 2 or G.shape[0] != G.shape[1]:
                raise ValueError(f"matrix {k} is not square")
            if m is None:
                m = G.shape[0]
            elif G.shape[0] != m:
                raise ValueError("matrices have inconsistent sizes")
            if np.any(G < -ROW_TOL):
                raise ValueError(f"matrix {k} has negative entries")
            rows = np.abs(G.sum(axis=1) - 1.0).max()
            if rows > 1e-9:
                raise ValueError(f"matrix {k} rows do not sum to 1 (err {rows:.2e})")
            if self.doubly:
                cols = np.abs(G.sum(axis=0) - 1.0).max()
                if cols > 1e-9:
                    raise ValueError(
                        f"matrix {k} declared doubly stochastic but columns are off by {cols:.2e}"
                    )
            mats.append(G)
        self.matrices = mats
        if self.tau is None:
            self.tau = len(mats)
        self.tau = int(self.tau)
        if self.tau < 1:
            raise ValueError("tau must be positive")

    @property
    def n_nodes(self) -> int:
        return self.matrices[0].shape[0]

    @property
    def period(self) -> int:
        return len(self.matrices)

    @property
    def constant(self) -> bool:
        return self.period == 1 and self.periodic

    def matrix_at(self, k: int) -> np.ndarray:
        if k < 0:
            raise IndexError("round index must be nonnegative")
        if self.periodic:
            return self.matrices[k % self.period]
        if k >= self.period:
            raise IndexError(
                f"round {k} beyond the end of a non-periodic schedule of length {self.period}"
            )
        return self.matrices[k]

    def edges_at(self, k: int) -> set:
        """Directed edges (i, j) carrying a positive weight in round k."""
        G = self.matrix_at(k)
        out = set()
        idx = np.argwhere(G > 0)
        for i, j in idx:
            if i != j:
                out.add((int(i), int(j)))
        return out


class RoundLedger:
    """Counts scalar values transmitted per directed edge, round by round.

    Identical consecutive rounds are stored as (counts, repeat) runs so long
    experiments stay cheap to account for.
    """

    def __init__(self):
        self.runs = []
        self._total = 0
        self._n_rounds = 0

    def record_round(self, counts: dict, repeat: int = 1):
        repeat = int(repeat)
        if repeat < 1:
            raise ValueError("repeat must be >= 1")
        clean = {}
        for (i, j), c in counts.items():
            c = int(c)
            if c < 0:
                raise ValueError("negative message count")
            if c:
                clean[(int(i), int(j))] = c
        per_round = sum(clean.values())
        if self.runs and self.runs[-1][0] == clean:
            self.runs[-1] = (clean, self.runs[-1][1] + repeat)
        else:
            self.runs.append((clean, repeat))
        self._total += per_round * repeat
        self._n_rounds += repeat

    @property
    def total(self) -> int:
        return self._total

    @property
    def n_rounds(self) -> int:
        return self._n_rounds

    def cumulative(self) -> np.ndarray:
        if not self.runs:
            return np.zeros(0)
        per = np.concatenate(
            [np.full(rep, sum(c.values()), dtype=np.int64) for c, rep in self.runs]
        )
        return np.cumsum(per)


def metropolis_weights(graph: CommGraph, tau: int | None = None) -> WeightSchedule:
    """Constant Metropolis weights: gamma_ij = 1 / (1 + max(deg_i, deg_j))."""
    if not graph.is_symmetric():
        raise ValueError("Metropolis weights need a symmetric edge set")
    m = graph.n_nodes
    deg = graph.degrees()
    G = np.zeros((m, m))
    for a, b in graph.undirected_pairs():
        w = 1.0 / (1.0 + max(deg[a], deg[b]))
        G[a, b] = w
        G[b, a] = w
    for i in range(m):
        G[i, i] = 1.0 - G[i].sum()
    return WeightSchedule([G], periodic=True, doubly=True, tau=tau or 1)


def consensus_round(
    schedule: WeightSchedule,
    k: int,
    states,
    ledger: RoundLedger | None = None,
) -> np.ndarray:
    """One averaging round: ``x_i <- sum_j gamma_k^ij x_j``.

    ``states`` is anything that stacks to an (M, d) array. Each positive
    off-diagonal weight is credited as one vector transmission.
    """
    X = np.atleast_2d(np.asarray(states, dtype=float))
    G = schedule.matrix_at(k)
    if X.shape[0] != G.shape[0]:
        raise ValueError("state count does not match the schedule size")
    out = G @ X
    if ledger is not None:
        d = X.shape[1]
        ledger.record_round({(i, j): d for (i, j) in schedule.edges_at(k)})
    return out


def power_weights(schedule: WeightSchedule, mu: int) -> np.ndarray:
    """mu-fold product of a constant schedule's matrix (identity for mu=0)."""
    if not schedule.constant:
        raise ValueError("power weights require a constant schedule")
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    return np.linalg.matrix_power(schedule.matrices[0], mu)


def check_joint_connectivity(schedule: WeightSchedule, tau: int | None = None) -> bool:
    """True when every window of tau consecutive rounds has a connected union
    graph over the persistent edges.

    For periodic schedules the persistent edge set is the union over one
    period; non-periodic schedules use the union over the whole horizon and
    only full windows inside it.
    """
    tau = schedule.tau if tau is None else int(tau)
    if tau < 1:
        raise ValueError("tau must be positive")
    n = schedule.n_nodes
    per = schedule.period
    persistent = set()
    for k in range(per):
        persistent |= {(min(i, j), max(i, j)) for i, j in schedule.edges_at(k)}
    if schedule.periodic:
        starts = range(per)
    else:
        if tau > per:
            return False
        starts = range(per - tau + 1)
    for start in starts:
        union = set()
        for k in range(start, start + tau):
            if not schedule.periodic and k >= per:
                break
            union |= {(min(i, j), max(i, j)) for i, j in schedule.edges_at(k)}
        union &= persistent
        if not _connected(n, union):
            return False
    return True
