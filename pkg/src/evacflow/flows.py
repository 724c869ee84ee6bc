"""Free-flow evacuation models on the time-expanded graph.

Four solvers share the FlowSolution result type:

* ``solve_ff``      -- largest evacuee volume that can reach safety (max flow).
* ``solve_ff_e``    -- push the first departure as late as possible while
                       keeping that volume; monotone bisection over the first
                       allowed departure step, with a MIP formulation kept as a
                       cross-check oracle.
* ``solve_ff_i``    -- route all demand at min cost, where departing at step t
                       costs (H - t)/H and unserved demand pays a penalty; this
                       packs departures late and prices what cannot make it.
* ``solve_ff_bar``  -- implicit-objective flow restricted to a loop-free set of
                       static edges chosen by binaries (single direction per
                       road, no transit branching beyond what enters).

The max-flow and min-cost paths are combinatorial (Dinic / successive shortest
paths); equivalent LP formulations are built by ``build_ff_lp`` and used as
oracles in the test-suite on desk-size instances.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .graph import (ARC_MOVE, ARC_OVERFLOW, ARC_SINK, ARC_SOURCE, ARC_WAIT,
                    EvacuationGraph, NodeKind, TimeExpandedGraph, format_clock)
from .lp import (LpModel, LpSolution, SolveBudget, SolveStatus, solve_lp,
                 solve_mip)

_TOL = 1e-9


class ModelInfeasible(RuntimeError):
    """A stated requirement (e.g. a flow lower bound) cannot be met."""


@dataclass
class FlowSolution:
    model: str
    phi: float
    delta_step: int
    per_node: dict[int, float]                  # evacuated volume by origin
    unserved: dict[int, float]                  # demand that never reaches safety
    departures: dict[int, list[tuple[int, float]]]  # origin -> (step, volume)
    arc_flow: np.ndarray | None = None          # aligned with the expanded arcs
    objective: float | None = None              # model-specific objective value
    bound: float | None = None                  # MIP bound, when applicable
    gap: float | None = None
    used_edges: tuple[int, ...] | None = None   # static edges kept (ff-bar)
    status: str = "Optimal"
    wall_time: float = 0.0

    def delta_clock(self, g: EvacuationGraph) -> str:
        return format_clock(self.delta_step, g.step_seconds)

    def to_report_dict(self, g: EvacuationGraph) -> dict:
        total = g.total_demand()
        return {
            "version": "evacflow-report/1",
            "model": self.model,
            "status": self.status,
            "phi": self.phi,
            "delta_step": self.delta_step,
            "delta_clock": self.delta_clock(g),
            "evacuated_pct": 100.0 * self.phi / total if total > 0 else 100.0,
            "per_node_evacuated": {str(k): v for k, v in sorted(self.per_node.items())},
            "unserved": {str(k): v for k, v in sorted(self.unserved.items())},
            "departures": {str(k): [[t, v] for t, v in vs]
                           for k, vs in sorted(self.departures.items())},
            "objective": self.objective,
            "bound": self.bound,
            "gap": self.gap,
            "used_edges": None if self.used_edges is None else list(self.used_edges),
            "wall_time_s": self.wall_time,
            "instance": {"name": g.name, "horizon": g.horizon,
                         "step_seconds": g.step_seconds},
        }


# -- residual network shared by Dinic and min-cost flow ------------------------


class _Residual:
    """Paired-arc residual structure over the expanded graph's arcs."""

    def __init__(self, te: TimeExpandedGraph, *, skip: set[int] | None = None):
        self.te = te
        big = te.g.total_demand() + 1.0
        used = sorted({*te.arc_tail, *te.arc_head, te.source, te.sink})
        self.node_of = {u: i for i, u in enumerate(used)}
        self.n = len(used)
        self.src = self.node_of[te.source]
        self.snk = self.node_of[te.sink]
        self.to: list[int] = []
        self.cap: list[float] = []
        self.orig: list[int] = []        # te arc index for forward arcs, -1 back
        self.adj: list[list[int]] = [[] for _ in range(self.n)]
        for ai in range(te.n_arcs):
            if skip and ai in skip:
                continue
            u = self.node_of[te.arc_tail[ai]]
            v = self.node_of[te.arc_head[ai]]
            c = te.arc_cap[ai]
            c = big if math.isinf(c) else c
            self.adj[u].append(len(self.to))
            self.to.append(v)
            self.cap.append(c)
            self.orig.append(ai)
            self.adj[v].append(len(self.to))
            self.to.append(u)
            self.cap.append(0.0)
            self.orig.append(-1)

    def flows(self) -> np.ndarray:
        """Net flow per original te arc (backward residual = pushed flow)."""
        out = np.zeros(self.te.n_arcs)
        for k in range(0, len(self.to), 2):
            ai = self.orig[k]
            out[ai] = self.cap[k + 1]
        return out


def _dinic(res: _Residual) -> float:
    total = 0.0
    n = res.n
    while True:
        level = [-1] * n
        level[res.src] = 0
        q = [res.src]
        for u in q:
            for k in res.adj[u]:
                if res.cap[k] > _TOL and level[res.to[k]] < 0:
                    level[res.to[k]] = level[u] + 1
                    q.append(res.to[k])
        if level[res.snk] < 0:
            return total
        it = [0] * n

        def dfs(u: int, limit: float) -> float:
            if u == res.snk:
                return limit
            while it[u] < len(res.adj[u]):
                k = res.adj[u][it[u]]
                v = res.to[k]
                if res.cap[k] > _TOL and level[v] == level[u] + 1:
                    pushed = dfs(v, min(limit, res.cap[k]))
                    if pushed > _TOL:
                        res.cap[k] -= pushed
                        res.cap[k + 1 if k % 2 == 0 else k - 1] += pushed
                        return pushed
                it[u] += 1
            return 0.0

        while True:
            pushed = dfs(res.src, math.inf)
            if pushed <= _TOL:
                break
            total += pushed


def _min_cost_flow(res: _Residual, cost: list[float]) -> tuple[float, float]:
    """Successive shortest paths with potentials; costs must be >= 0.

    ``cost`` is per residual arc (backward arcs carry the negated cost).
    Returns (flow value, total cost); pushes as much flow as the network
    admits from src to snk.
    """
    n = res.n
    pot = [0.0] * n
    value = 0.0
    total_cost = 0.0
    while True:
        dist = [math.inf] * n
        prev_arc = [-1] * n
        dist[res.src] = 0.0
        heap: list[tuple[float, int]] = [(0.0, res.src)]
        while heap:
            d, u = heapq.heappop(heap)
            if d > dist[u] + 1e-12:
                continue
            for k in res.adj[u]:
                if res.cap[k] <= _TOL:
                    continue
                v = res.to[k]
                w = cost[k] + pot[u] - pot[v]
                if w < 0:
                    w = 0.0   # numerical guard; true reduced costs are >= 0
                nd = d + w
                if nd < dist[v] - 1e-12:
                    dist[v] = nd
                    prev_arc[v] = k
                    heapq.heappush(heap, (nd, v))
        if math.isinf(dist[res.snk]):
            return value, total_cost
        for u in range(n):
            if not math.isinf(dist[u]):
                pot[u] += dist[u]
        # bottleneck along the path
        bottleneck = math.inf
        v = res.snk
        while v != res.src:
            k = prev_arc[v]
            bottleneck = min(bottleneck, res.cap[k])
            v = res.to[k ^ 1]
        v = res.snk
        while v != res.src:
            k = prev_arc[v]
            res.cap[k] -= bottleneck
            res.cap[k ^ 1] += bottleneck
            total_cost += bottleneck * cost[k]
            v = res.to[k ^ 1]
        value += bottleneck


# -- decomposition into departures ---------------------------------------------


def _decompose(te: TimeExpandedGraph, arc_flow: np.ndarray
               ) -> tuple[dict[int, float], dict[int, float],
                          dict[int, list[tuple[int, float]]]]:
    """Split an arc flow into origin departures and unserved remainders.

    Deterministic: at every node the lowest-index arc with remaining flow is
    taken; flow cycles (possible only through zero-travel loops) are cancelled
    on sight.
    """
    flow = arc_flow.copy()
    out_arcs: dict[int, list[int]] = {}
    for ai in range(te.n_arcs):
        if flow[ai] > _TOL:
            out_arcs.setdefault(te.arc_tail[ai], []).append(ai)
    for lst in out_arcs.values():
        lst.sort()

    per_node: dict[int, float] = {}
    unserved: dict[int, float] = {}
    departures: dict[int, dict[int, float]] = {}

    def next_arc(u: int) -> int | None:
        lst = out_arcs.get(u)
        while lst:
            if flow[lst[0]] > _TOL:
                return lst[0]
            lst.pop(0)
        return None

    while True:
        k0 = next_arc(te.source)
        if k0 is None:
            break
        path = [k0]
        seen_at: dict[int, int] = {te.source: 0}
        u = te.arc_head[k0]
        while u != te.sink:
            if u in seen_at:
                # cancel the cycle portion
                start = seen_at[u]
                cyc = path[start + 1:]
                bott = min(flow[a] for a in cyc)
                for a in cyc:
                    flow[a] -= bott
                del path[start + 1:]
            seen_at[u] = len(path) - 1
            k = next_arc(u)
            if k is None:
                # dead end can only come from numerical dust; drop the grain
                for a in path:
                    flow[a] = max(flow[a] - _TOL, 0.0)
                break
            path.append(k)
            u = te.arc_head[k]
        if u != te.sink:
            continue
        bott = min(flow[a] for a in path)
        origin = te.split(te.arc_head[path[0]])[0]
        first_move = next((a for a in path if te.arc_kind[a] == ARC_MOVE), None)
        via_overflow = te.arc_kind[path[-1]] == ARC_OVERFLOW
        for a in path:
            flow[a] -= bott
        if via_overflow:
            unserved[origin] = unserved.get(origin, 0.0) + bott
        else:
            per_node[origin] = per_node.get(origin, 0.0) + bott
            t = te.arc_time[first_move] if first_move is not None else 0
            departures.setdefault(origin, {})[t] = \
                departures.get(origin, {}).get(t, 0.0) + bott
    dep_lists = {k: sorted(v.items()) for k, v in departures.items()}
    return per_node, unserved, dep_lists


def _delta_from_flow(te: TimeExpandedGraph, arc_flow: np.ndarray) -> int:
    delta = te.horizon
    for ai in range(te.n_arcs):
        if (te.arc_kind[ai] == ARC_MOVE and arc_flow[ai] > _TOL
                and te.g.nodes[te.split(te.arc_tail[ai])[0]].kind is NodeKind.EVACUATED):
            delta = min(delta, te.arc_time[ai])
    return delta


def verify_flow(te: TimeExpandedGraph, arc_flow: np.ndarray) -> float:
    """Largest conservation/capacity violation (should be <= 1e-6)."""
    worst = 0.0
    bal: dict[int, float] = {}
    for ai in range(te.n_arcs):
        f = arc_flow[ai]
        worst = max(worst, -f)
        cap = te.arc_cap[ai]
        if not math.isinf(cap):
            worst = max(worst, f - cap)
        bal[te.arc_tail[ai]] = bal.get(te.arc_tail[ai], 0.0) - f
        bal[te.arc_head[ai]] = bal.get(te.arc_head[ai], 0.0) + f
    for u, v in bal.items():
        if u not in (te.source, te.sink):
            worst = max(worst, abs(v))
    return worst


# -- FF: max flow ---------------------------------------------------------------


def solve_ff(te: TimeExpandedGraph, *, skip_departures_before: int = 0) -> FlowSolution:
    """Largest volume reaching safety within the horizon."""
    skip = None
    if skip_departures_before > 0:
        skip = _early_departure_arcs(te, skip_departures_before)
    res = _Residual(te, skip=skip)
    phi = _dinic(res)
    arc_flow = res.flows()
    per_node, unserved, deps = _decompose(te, arc_flow)
    return FlowSolution(model="ff", phi=phi,
                        delta_step=_delta_from_flow(te, arc_flow),
                        per_node=per_node, unserved=_fill_unserved(te, per_node),
                        departures=deps, arc_flow=arc_flow, objective=phi)


def _fill_unserved(te: TimeExpandedGraph, per_node: dict[int, float]) -> dict[int, float]:
    out = {}
    for n in te.g.evacuated_ids():
        d = te.g.nodes[n].demand
        if d > 0:
            left = d - per_node.get(n, 0.0)
            if left > 1e-7:
                out[n] = left
    return out


def _early_departure_arcs(te: TimeExpandedGraph, before: int) -> set[int]:
    bad = set()
    for ai in range(te.n_arcs):
        if (te.arc_kind[ai] == ARC_MOVE and te.arc_time[ai] < before
                and te.g.nodes[te.split(te.arc_tail[ai])[0]].kind
                is NodeKind.EVACUATED):
            bad.add(ai)
    return bad


def build_ff_lp(te: TimeExpandedGraph, *, skip_departures_before: int = 0
                ) -> tuple[LpModel, list[int]]:
    """Arc-flow LP for the max-flow model; oracle for the combinatorial path."""
    m = LpModel(sense="max", name="ff-lp")
    skip = _early_departure_arcs(te, skip_departures_before) \
        if skip_departures_before > 0 else set()
    var_of: list[int] = []
    big = te.g.total_demand()
    for ai in range(te.n_arcs):
        if ai in skip:
            var_of.append(-1)
            continue
        cap = te.arc_cap[ai]
        ub = big if math.isinf(cap) else cap
        var_of.append(m.add_var(lb=0.0, ub=ub))
    # objective: everything entering the sink through safe copies
    for ai in range(te.n_arcs):
        if var_of[ai] >= 0 and te.arc_kind[ai] == ARC_SINK:
            m.obj[var_of[ai]] = 1.0
    incident: dict[int, list[tuple[int, float]]] = {}
    for ai in range(te.n_arcs):
        if var_of[ai] < 0:
            continue
        incident.setdefault(te.arc_tail[ai], []).append((var_of[ai], -1.0))
        incident.setdefault(te.arc_head[ai], []).append((var_of[ai], 1.0))
    for u in sorted(incident):
        if u in (te.source, te.sink):
            continue
        m.add_constr(incident[u], "=", 0.0)
    return m, var_of


def solve_ff_lp(te: TimeExpandedGraph) -> FlowSolution:
    m, var_of = build_ff_lp(te)
    sol = solve_lp(m)
    if sol.status is not SolveStatus.OPTIMAL:
        raise RuntimeError(f"max-flow LP ended {sol.status.value}")
    arc_flow = np.zeros(te.n_arcs)
    for ai, j in enumerate(var_of):
        if j >= 0:
            arc_flow[ai] = sol.x[j]
    per_node, unserved, deps = _decompose(te, arc_flow)
    return FlowSolution(model="ff", phi=float(sol.objective),
                        delta_step=_delta_from_flow(te, arc_flow),
                        per_node=per_node, unserved=_fill_unserved(te, per_node),
                        departures=deps, arc_flow=arc_flow,
                        objective=float(sol.objective))


# -- FF-E: latest possible first departure ---------------------------------------


def delta_upper_bound(g: EvacuationGraph) -> int:
    """Cap on the first-departure step: the earliest deadline that matters."""
    with_demand = [g.nodes[n].deadline for n in g.evacuated_ids()
                   if g.nodes[n].demand > 0]
    if with_demand:
        return min(with_demand)
    all_dl = [g.nodes[n].deadline for n in g.evacuated_ids()]
    return min(all_dl) if all_dl else g.horizon


def solve_ff_e(te: TimeExpandedGraph, phi_max: float, *,
               method: str = "bisection",
               budget: SolveBudget | None = None) -> FlowSolution:
    """Latest first departure that still evacuates ``phi_max``.

    The default route bisects the first allowed departure step, testing
    feasibility with a max flow; ``method='mip'`` solves the binary
    formulation instead (used as an oracle for the bisection).
    """
    if method == "mip":
        return _ff_e_mip(te, phi_max, budget or SolveBudget())
    d_ub = delta_upper_bound(te.g)
    base = solve_ff(te)
    if base.phi < phi_max - 1e-9:
        raise ModelInfeasible(
            f"required volume {phi_max} exceeds achievable {base.phi}")
    if phi_max <= _TOL:
        sol = FlowSolution(model="ff-e", phi=0.0, delta_step=d_ub,
                           per_node={}, unserved=_fill_unserved(te, {}),
                           departures={}, arc_flow=np.zeros(te.n_arcs),
                           objective=float(d_ub))
        return sol
    lo, hi = 0, d_ub
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if solve_ff(te, skip_departures_before=mid).phi >= phi_max - 1e-9:
            lo = mid
        else:
            hi = mid - 1
    final = solve_ff(te, skip_departures_before=lo)
    final.model = "ff-e"
    final.objective = float(lo)
    if final.delta_step >= te.horizon and final.phi <= _TOL:
        final.delta_step = d_ub
    return final


def _ff_e_mip(te: TimeExpandedGraph, phi_max: float,
              budget: SolveBudget) -> FlowSolution:
    g = te.g
    d_ub = delta_upper_bound(g)
    m, var_of = build_ff_lp(te)
    for j in range(m.num_vars):
        m.obj[j] = 0.0
    dvar = m.add_var(lb=0.0, ub=float(d_ub), obj=1.0, name="first_departure")
    dep_by_t: dict[int, list[int]] = {}
    for ai in range(te.n_arcs):
        if (te.arc_kind[ai] == ARC_MOVE
                and g.nodes[te.split(te.arc_tail[ai])[0]].kind is NodeKind.EVACUATED):
            dep_by_t.setdefault(te.arc_time[ai], []).append(ai)
    src_terms = [(var_of[ai], 1.0) for ai in range(te.n_arcs)
                 if te.arc_kind[ai] == ARC_SOURCE]
    m.add_constr(src_terms, ">=", phi_max - 1e-9, name="volume_floor")
    for t in range(0, d_ub + 1):
        arcs = dep_by_t.get(t, [])
        beta = m.add_var(lb=0.0, ub=1.0, integer=True, name=f"beta{t}")
        if arcs:
            cap_sum = sum(te.arc_cap[ai] for ai in arcs)
            m.add_constr([(var_of[ai], 1.0) for ai in arcs] + [(beta, -cap_sum)],
                         "<=", 0.0, name=f"gate{t}")
        m.add_constr([(dvar, 1.0), (beta, float(d_ub - t))], "<=", float(d_ub),
                     name=f"push{t}")
    sol = solve_mip(m, budget)
    if sol.status is SolveStatus.INFEASIBLE:
        raise ModelInfeasible(f"required volume {phi_max} is unreachable")
    if sol.x is None:
        return FlowSolution(model="ff-e", phi=0.0, delta_step=0, per_node={},
                            unserved={}, departures={}, status=sol.status.value)
    arc_flow = np.zeros(te.n_arcs)
    for ai, j in enumerate(var_of):
        if j >= 0:
            arc_flow[ai] = sol.x[j]
    per_node, _, deps = _decompose(te, arc_flow)
    phi = sum(per_node.values())
    delta = _delta_from_flow(te, arc_flow)
    if phi <= _TOL:
        delta = d_ub
    return FlowSolution(model="ff-e", phi=phi, delta_step=delta,
                        per_node=per_node, unserved=_fill_unserved(te, per_node),
                        departures=deps, arc_flow=arc_flow,
                        objective=float(sol.x[dvar]),
                        bound=sol.bound, gap=sol.gap, status=sol.status.value)


# -- FF-I: implicit objective -----------------------------------------------------


def departure_cost(horizon: int, t: int) -> float:
    return (horizon - t) / horizon


def solve_ff_i(te: TimeExpandedGraph, *, unserved_penalty: float | None = None
               ) -> FlowSolution:
    """Route all demand at minimum cost; late departures are cheaper, demand
    that cannot reach safety drains through penalty arcs."""
    if not te.has_overflow:
        raise ValueError("expanded graph must be built with with_overflow=True")
    g = te.g
    c_ne = float(unserved_penalty) if unserved_penalty is not None else float(g.horizon)
    res = _Residual(te)
    cost = [0.0] * len(res.to)
    for k in range(0, len(res.to), 2):
        ai = res.orig[k]
        c = 0.0
        if te.arc_kind[ai] == ARC_OVERFLOW:
            c = c_ne
        elif te.arc_kind[ai] == ARC_MOVE:
            tail_node = te.split(te.arc_tail[ai])[0]
            if g.nodes[tail_node].kind is NodeKind.EVACUATED:
                c = departure_cost(g.horizon, te.arc_time[ai])
        cost[k] = c
        cost[k + 1] = -c
    value, total_cost = _min_cost_flow(res, cost)
    arc_flow = res.flows()
    per_node, unserved, deps = _decompose(te, arc_flow)
    phi = sum(per_node.values())
    return FlowSolution(model="ff-i", phi=phi,
                        delta_step=_delta_from_flow(te, arc_flow),
                        per_node=per_node, unserved=_fill_unserved(te, per_node),
                        departures=deps, arc_flow=arc_flow,
                        objective=total_cost)


def build_ff_i_lp(te: TimeExpandedGraph, *, unserved_penalty: float | None = None
                  ) -> tuple[LpModel, list[int]]:
    """LP twin of solve_ff_i (oracle)."""
    if not te.has_overflow:
        raise ValueError("expanded graph must be built with with_overflow=True")
    g = te.g
    c_ne = float(unserved_penalty) if unserved_penalty is not None else float(g.horizon)
    m, var_of = build_ff_lp(te)
    for j in range(m.num_vars):
        m.obj[j] = 0.0
    m.sense = "min"
    for ai in range(te.n_arcs):
        j = var_of[ai]
        if j < 0:
            continue
        if te.arc_kind[ai] == ARC_OVERFLOW:
            m.obj[j] = c_ne
        elif te.arc_kind[ai] == ARC_MOVE:
            tail_node = te.split(te.arc_tail[ai])[0]
            if g.nodes[tail_node].kind is NodeKind.EVACUATED:
                m.obj[j] = departure_cost(g.horizon, te.arc_time[ai])
        if te.arc_kind[ai] == ARC_SOURCE:
            m.lb[j] = te.arc_cap[ai]   # all demand must leave the source
    return m, var_of


# -- FF-bar: static single-direction routes ---------------------------------------


def solve_ff_bar(te: TimeExpandedGraph, budget: SolveBudget | None = None, *,
                 unserved_penalty: float | None = None) -> FlowSolution:
    """Implicit objective over flows confined to a chosen static edge set.

    Binaries pick which static edges stay open; transit nodes may not open
    more outgoing than incoming edges, and two-way roads collapse to one
    direction.  Solved as a MIP under the budget with the gap reported.
    """
    if not te.has_overflow:
        raise ValueError("expanded graph must be built with with_overflow=True")
    budget = budget or SolveBudget()
    g = te.g
    m, var_of = build_ff_i_lp(te, unserved_penalty=unserved_penalty)
    edges_present = sorted({te.arc_edge[ai] for ai in range(te.n_arcs)
                            if te.arc_kind[ai] == ARC_MOVE})
    z_of: dict[int, int] = {}
    for e in edges_present:
        z_of[e] = m.add_var(lb=0.0, ub=1.0, integer=True, name=f"z{e}")
    for ai in range(te.n_arcs):
        if te.arc_kind[ai] != ARC_MOVE or var_of[ai] < 0:
            continue
        e = te.arc_edge[ai]
        m.add_constr([(var_of[ai], 1.0), (z_of[e], -te.arc_cap[ai])], "<=", 0.0)
    for n in g.transit_ids():
        outs = [z_of[e] for e in g.out_edges[n] if e in z_of]
        ins = [z_of[e] for e in g.in_edges[n] if e in z_of]
        if outs:
            m.add_constr([(z, 1.0) for z in outs] + [(z, -1.0) for z in ins],
                         "<=", 0.0, name=f"branch{n}")
    seen_pairs = set()
    for e in edges_present:
        tail, head = g.edges[e].tail, g.edges[e].head
        for e2 in g.out_edges[head]:
            if e2 in z_of and g.edges[e2].head == tail and (e2, e) not in seen_pairs:
                seen_pairs.add((e, e2))
                m.add_constr([(z_of[e], 1.0), (z_of[e2], 1.0)], "<=", 1.0,
                             name=f"oneway{e}_{e2}")
    sol = solve_mip(m, budget)
    if sol.x is None:
        return FlowSolution(model="ff-bar", phi=0.0, delta_step=0, per_node={},
                            unserved={}, departures={}, status=sol.status.value,
                            gap=sol.gap, bound=sol.bound)
    arc_flow = np.zeros(te.n_arcs)
    for ai, j in enumerate(var_of):
        if j >= 0:
            arc_flow[ai] = sol.x[j]
    per_node, unserved, deps = _decompose(te, arc_flow)
    phi = sum(per_node.values())
    used = tuple(e for e in edges_present if sol.x[z_of[e]] > 0.5)
    return FlowSolution(model="ff-bar", phi=phi,
                        delta_step=_delta_from_flow(te, arc_flow),
                        per_node=per_node, unserved=_fill_unserved(te, per_node),
                        departures=deps, arc_flow=arc_flow,
                        objective=sol.objective, bound=sol.bound, gap=sol.gap,
                        used_edges=used, status=sol.status.value)
