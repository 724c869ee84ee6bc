"""Independent reference implementations the tests check the package against.

Everything here is deliberately naive and self-contained: a breadth-first
augmenting-path max flow, a from-first-principles time expansion, and an
exhaustive route-assignment optimizer that solves one small scheduling LP
(via scipy, not the package's own engine) per assignment combination.
"""

from __future__ import annotations

import itertools
import math
from collections import deque

import numpy as np
from scipy.optimize import linprog

from evacflow.graph import (EvacuationGraph, NodeKind, TimeExpandedGraph,
                            enumerate_simple_paths, make_path)

BIG = 1e15


# -- max flow by augmenting paths ------------------------------------------------


def max_flow_bfs(n_nodes: int, arcs: list[tuple[int, int, float]],
                 source: int, sink: int) -> float:
    """Edmonds-Karp on an arc list; infinite capacities clipped to BIG."""
    cap: list[float] = []
    to: list[int] = []
    head: list[list[int]] = [[] for _ in range(n_nodes)]

    def add(u: int, v: int, c: float) -> None:
        head[u].append(len(to))
        to.append(v)
        cap.append(min(c, BIG))
        head[v].append(len(to))
        to.append(u)
        cap.append(0.0)

    for u, v, c in arcs:
        add(u, v, c)

    total = 0.0
    while True:
        prev_arc = [-1] * n_nodes
        prev_arc[source] = -2
        q = deque([source])
        while q and prev_arc[sink] == -1:
            u = q.popleft()
            for ai in head[u]:
                if cap[ai] > 1e-12 and prev_arc[to[ai]] == -1:
                    prev_arc[to[ai]] = ai
                    q.append(to[ai])
        if prev_arc[sink] == -1:
            return total
        push = math.inf
        v = sink
        while v != source:
            ai = prev_arc[v]
            push = min(push, cap[ai])
            v = to[ai ^ 1]
        v = sink
        while v != source:
            ai = prev_arc[v]
            cap[ai] -= push
            cap[ai ^ 1] += push
            v = to[ai ^ 1]
        total += push


def te_max_flow(te: TimeExpandedGraph) -> float:
    arcs = [(te.arc_tail[ai], te.arc_head[ai], te.arc_cap[ai])
            for ai in range(te.n_arcs)]
    return max_flow_bfs(te.n_nodes, arcs, te.source, te.sink)


# -- unpruned time expansion from first principles --------------------------------


def unpruned_expansion(g: EvacuationGraph):
    """(n_nodes, arcs, source, sink, tn) built directly from the rules:
    a movement arc departs at t iff the traversal completes by horizon and
    expiry, and an evacuated tail has not passed its deadline; waiting only
    at evacuated and safe nodes; source arcs carry demand."""
    H = g.horizon
    order = g.node_ids()
    pos = {n: i for i, n in enumerate(order)}

    def tn(node: int, t: int) -> int:
        return pos[node] * (H + 1) + t

    source = len(order) * (H + 1)
    sink = source + 1
    arcs: list[tuple[int, int, float]] = []
    for e in g.edges:
        last = H - e.travel_time
        if e.expiry is not None:
            last = min(last, e.expiry - e.travel_time)
        nd = g.nodes[e.tail]
        if nd.kind is NodeKind.EVACUATED and nd.deadline is not None:
            last = min(last, nd.deadline)
        for t in range(last + 1):
            arcs.append((tn(e.tail, t), tn(e.head, t + e.travel_time),
                         e.capacity))
    for n in order:
        if g.nodes[n].kind is NodeKind.TRANSIT:
            continue
        for t in range(H):
            arcs.append((tn(n, t), tn(n, t + 1), math.inf))
    for n in g.evacuated_ids():
        if g.nodes[n].demand > 0:
            arcs.append((source, tn(n, 0), g.nodes[n].demand))
    for n in g.safe_ids():
        for t in range(H + 1):
            arcs.append((tn(n, t), sink, math.inf))
    return sink + 1, arcs, source, sink, tn


def reachable_time_nodes(n_nodes, arcs, source, sink) -> set[int]:
    """Time nodes on some source->sink path (double BFS)."""
    fwd = [[] for _ in range(n_nodes)]
    bwd = [[] for _ in range(n_nodes)]
    for u, v, _ in arcs:
        fwd[u].append(v)
        bwd[v].append(u)

    def sweep(adj, start):
        seen = [False] * n_nodes
        seen[start] = True
        q = deque([start])
        while q:
            u = q.popleft()
            for v in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    q.append(v)
        return seen

    f = sweep(fwd, source)
    b = sweep(bwd, sink)
    return {u for u in range(n_nodes) if f[u] and b[u]} - {source, sink}


# -- exhaustive single-route-per-area optimum -------------------------------------


def schedule_assignment(g: EvacuationGraph, chosen) -> float:
    """Best evacuated volume for one fixed route per area: a small LP with a
    variable per (route, departure step), demand rows, shared road rows."""
    idx: dict[tuple[int, int], int] = {}
    for pi, p in enumerate(chosen):
        for t in p.window:
            idx[(pi, t)] = len(idx)
    if not idx:
        return 0.0
    nv = len(idx)
    rows: list[np.ndarray] = []
    rhs: list[float] = []
    for pi, p in enumerate(chosen):
        row = np.zeros(nv)
        for t in p.window:
            row[idx[(pi, t)]] = 1.0
        rows.append(row)
        rhs.append(g.nodes[p.origin].demand)
    shared: dict[tuple[int, int], list[int]] = {}
    for pi, p in enumerate(chosen):
        for e, off in zip(p.edges, p.offsets):
            for t in p.window:
                shared.setdefault((e, t + off), []).append(idx[(pi, t)])
    for (e, _s), cols in sorted(shared.items()):
        row = np.zeros(nv)
        row[cols] = 1.0
        rows.append(row)
        rhs.append(g.edges[e].capacity)
    res = linprog(-np.ones(nv), A_ub=np.vstack(rows), b_ub=np.array(rhs),
                  bounds=(0, None), method="highs")
    assert res.status == 0, res.message
    return -res.fun


def usable_paths(g: EvacuationGraph, origin: int, *, max_paths=64,
                 max_edges=12):
    out = []
    for route in enumerate_simple_paths(g, origin, max_paths=max_paths,
                                        max_edges=max_edges):
        p = make_path(g, origin, route)
        if p is not None:
            out.append(p)
    return out


def assignment_optimum(g: EvacuationGraph, *, max_paths=64,
                       max_edges=12) -> float:
    """Exact optimum over plans that give each area one route: brute force
    over the assignment product, one scheduling LP each."""
    per_origin = []
    for k in g.evacuated_ids():
        paths = usable_paths(g, k, max_paths=max_paths, max_edges=max_edges)
        per_origin.append(paths if paths else [None])
    best = 0.0
    for combo in itertools.product(*per_origin):
        chosen = [p for p in combo if p is not None]
        if chosen:
            best = max(best, schedule_assignment(g, chosen))
    return best
