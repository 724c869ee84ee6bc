"""Exact single-route-per-origin model (RF) and its E/I variants.

One binary per (static edge, origin) picks each origin's route; continuous
per-origin flows on the time-expanded arcs are linked to the binaries and
share edge capacity.  Exact but heavy: the variable count grows with
|origins| x |expanded arcs|, so a size guard refuses construction beyond a
configurable budget and ``rf_size_estimate`` reports the would-be dimensions
without building anything.

Origin flows may dwell only at their own origin and at safe nodes.  A plan
schedules each origin's departures along a fixed route, so mid-route dwell
has no representation in the plan schema; allowing it would let RF report
volumes no plan can realize.  With that restriction RF's optimum equals the
best single-route plan, which is what the enumeration oracle in the
test-suite scores against.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

from .graph import (ARC_MOVE, ARC_OVERFLOW, ARC_SINK, ARC_SOURCE, ARC_WAIT,
                    EvacuationGraph, NodeKind, TimeExpandedGraph)
from .flows import delta_upper_bound, departure_cost
from .lp import LpModel, SolveBudget, solve_mip
from .plans import EvacuationPlan, plan_from_assignments

DEFAULT_VAR_BUDGET = 2_000_000


class RfTooLarge(RuntimeError):
    pass


def _static_route_edges(g: EvacuationGraph, origin: int) -> list[int]:
    """Static edges on some origin->safe walk (both-ways reachability).

    Edges leaving safe nodes are excluded: a route ends at the first safe
    node it reaches, and continuing past one is dominated by stopping."""
    safe = set(g.safe_ids())
    fwd = {origin}
    stack = [origin]
    while stack:
        u = stack.pop()
        if u in safe:
            continue
        for e in g.out_edges[u]:
            v = g.edges[e].head
            if v not in fwd:
                fwd.add(v)
                stack.append(v)
    back = set(safe)
    stack = list(back)
    while stack:
        u = stack.pop()
        for e in g.in_edges[u]:
            v = g.edges[e].tail
            if v not in back and v not in safe:
                back.add(v)
                stack.append(v)
    return [e for e in range(len(g.edges))
            if g.edges[e].tail not in safe
            and g.edges[e].tail in fwd and g.edges[e].tail in back
            and g.edges[e].head in back]


def _commodities(g: EvacuationGraph) -> list[int]:
    return [k for k in g.evacuated_ids() if g.nodes[k].demand > 0]


def rf_size_estimate(g: EvacuationGraph, te: TimeExpandedGraph) -> dict:
    """Would-be model dimensions, computed without building the model."""
    ks = _commodities(g)
    copies: dict[int, int] = {}
    wait_at: dict[int, int] = {}
    n_sink = n_wait_safe = n_overflow = 0
    safe = set(g.safe_ids())
    for ai in range(te.n_arcs):
        kind = te.arc_kind[ai]
        if kind == ARC_MOVE:
            copies[te.arc_edge[ai]] = copies.get(te.arc_edge[ai], 0) + 1
        elif kind == ARC_SINK:
            n_sink += 1
        elif kind == ARC_OVERFLOW:
            n_overflow += 1
        elif kind == ARC_WAIT:
            n, _ = te.split(te.arc_tail[ai])
            if n in safe:
                n_wait_safe += 1
            else:
                wait_at[n] = wait_at.get(n, 0) + 1
    n_bin = n_flow = n_link = n_cont = 0
    cons_rows = 0
    transit = set(g.transit_ids())
    for k in ks:
        edges_k = [e for e in _static_route_edges(g, k) if copies.get(e)]
        n_bin += len(edges_k)
        move_k = sum(copies[e] for e in edges_k)
        n_flow += move_k + wait_at.get(k, 0) + n_wait_safe + n_sink + 1 \
            + (1 if n_overflow else 0)
        n_link += move_k
        touched = ({g.edges[e].tail for e in edges_k} |
                   {g.edges[e].head for e in edges_k}) - set(g.safe_ids())
        n_cont += 2 * len(touched)   # continuity + in-degree rows
        cons_rows += te.kept_time_nodes
    n_cap = sum(copies.values())
    rows = len(ks) + n_cont + cons_rows + n_cap + n_link
    return {"binaries": n_bin, "continuous": n_flow,
            "variables": n_bin + n_flow, "rows": rows,
            "commodities": len(ks)}


@dataclass
class RfHandles:
    model: LpModel
    ks: list[int]
    x_of: dict[tuple[int, int], int]   # (static edge, origin) -> binary var
    f_of: dict[tuple[int, int], int]   # (expanded arc, origin) -> flow var
    edges_of: dict[int, list[int]]     # origin -> usable static edges


def build_rf(g: EvacuationGraph, te: TimeExpandedGraph, *,
             var_budget: int = DEFAULT_VAR_BUDGET) -> RfHandles:
    est = rf_size_estimate(g, te)
    if est["variables"] > var_budget:
        raise RfTooLarge(
            f"instance too large for RF: {est['variables']} variables "
            f"(budget {var_budget})")
    ks = _commodities(g)
    m = LpModel(sense="max", name="rf")
    x_of: dict[tuple[int, int], int] = {}
    f_of: dict[tuple[int, int], int] = {}
    edges_of: dict[int, list[int]] = {}

    move_arcs_of_edge: dict[int, list[int]] = {}
    sink_arcs: list[int] = []
    wait_by_node: dict[int, list[int]] = {}
    source_arc_of: dict[int, int] = {}
    overflow_arc_of: dict[int, int] = {}
    for ai in range(te.n_arcs):
        kind = te.arc_kind[ai]
        if kind == ARC_MOVE:
            move_arcs_of_edge.setdefault(te.arc_edge[ai], []).append(ai)
        elif kind == ARC_SINK:
            sink_arcs.append(ai)
        elif kind == ARC_WAIT:
            wait_by_node.setdefault(te.split(te.arc_tail[ai])[0], []).append(ai)
        elif kind == ARC_SOURCE:
            source_arc_of[te.split(te.arc_head[ai])[0]] = ai
        elif kind == ARC_OVERFLOW:
            overflow_arc_of[te.split(te.arc_tail[ai])[0]] = ai

    safe_nodes = set(g.safe_ids())
    for k in ks:
        edges_k = [e for e in _static_route_edges(g, k)
                   if e in move_arcs_of_edge]
        edges_of[k] = edges_k
        for e in edges_k:
            x_of[(e, k)] = m.add_var(lb=0.0, ub=1.0, integer=True,
                                     name=f"x_e{e}_k{k}")
        arcs_k: list[int] = []
        for e in edges_k:
            arcs_k.extend(move_arcs_of_edge[e])
        for n, lst in wait_by_node.items():
            if n == k or n in safe_nodes:
                arcs_k.extend(lst)
        arcs_k.extend(sink_arcs)
        if k in source_arc_of:
            arcs_k.append(source_arc_of[k])
        if k in overflow_arc_of:
            arcs_k.append(overflow_arc_of[k])
        for ai in arcs_k:
            cap = te.arc_cap[ai]
            ub = math.inf if math.isinf(cap) else cap
            obj = 1.0 if te.arc_kind[ai] == ARC_SINK else 0.0
            f_of[(ai, k)] = m.add_var(lb=0.0, ub=ub, obj=obj,
                                      name=f"f_a{ai}_k{k}")

    pass_nodes = sorted(set(g.transit_ids()) | set(g.evacuated_ids()))
    for k in ks:
        outs = [x_of[(e, k)] for e in edges_of[k] if g.edges[e].tail == k]
        if not outs:
            continue   # origin cannot reach safety; its flow stays zero
        m.add_constr([(j, 1.0) for j in outs], "=", 1.0, name=f"onepath_k{k}")
        # degree balance alone admits cycles grafted onto the route, which
        # the flow could use as mid-route buffers; capping each node's chosen
        # in-degree at one pins the binaries to a single simple route (any
        # leftover cycle is node-disjoint from it and carries no flow)
        for i in pass_nodes:
            ins = [x_of[(e, k)] for e in edges_of[k] if g.edges[e].head == i]
            outs_i = [x_of[(e, k)] for e in edges_of[k] if g.edges[e].tail == i]
            if i != k and (ins or outs_i):
                m.add_constr([(j, 1.0) for j in ins]
                             + [(j, -1.0) for j in outs_i], "=", 0.0,
                             name=f"cont_k{k}_i{i}")
            if ins:
                m.add_constr([(j, 1.0) for j in ins], "<=", 1.0,
                             name=f"indeg_k{k}_i{i}")

    incident: dict[tuple[int, int], list[tuple[int, float]]] = {}
    for (ai, k), j in f_of.items():
        incident.setdefault((te.arc_tail[ai], k), []).append((j, -1.0))
        incident.setdefault((te.arc_head[ai], k), []).append((j, 1.0))
    for (tn, k), terms in sorted(incident.items()):
        if tn in (te.source, te.sink):
            continue
        m.add_constr(terms, "=", 0.0)

    for e, arcs in sorted(move_arcs_of_edge.items()):
        for ai in arcs:
            terms = [(f_of[(ai, k)], 1.0) for k in ks if (ai, k) in f_of]
            if len(terms) > 1:
                m.add_constr(terms, "<=", te.arc_cap[ai], name=f"cap_a{ai}")
            for k in ks:
                if (ai, k) in f_of:
                    m.add_constr([(f_of[(ai, k)], 1.0),
                                  (x_of[(e, k)], -te.arc_cap[ai])], "<=", 0.0)
    return RfHandles(model=m, ks=ks, x_of=x_of, f_of=f_of, edges_of=edges_of)


@dataclass
class RfResult:
    plan: EvacuationPlan
    phi: float
    delta_step: int
    objective: float | None
    bound: float | None
    gap: float | None
    status: str
    wall_time: float = 0.0


def _extract_plan(g: EvacuationGraph, te: TimeExpandedGraph, h: RfHandles,
                  x: list[float]) -> list[tuple]:
    """One route per origin from the binaries; the schedule comes from the
    flow on the route's first edge.  Binaries may contain cycles detached
    from the route (degree-balance admits them); the search simply never
    reaches them."""
    rows = []
    for k in h.ks:
        chosen = {e for e in h.edges_of[k] if x[h.x_of[(e, k)]] > 0.5}
        route: tuple[int, ...] | None = None
        stack: list[tuple[int, tuple[int, ...]]] = [(k, ())]
        seen: set[int] = set()
        while stack:
            u, pref = stack.pop()
            if g.nodes[u].kind is NodeKind.SAFE:
                route = pref
                break
            if u in seen:
                continue
            seen.add(u)
            for e in sorted(g.out_edges[u], reverse=True):
                if e in chosen:
                    stack.append((g.edges[e].head, pref + (e,)))
        if not route:
            continue
        first = route[0]
        deps: dict[int, float] = {}
        for ai in range(te.n_arcs):
            if (te.arc_kind[ai] == ARC_MOVE and te.arc_edge[ai] == first
                    and (ai, k) in h.f_of):
                v = x[h.f_of[(ai, k)]]
                if v > 1e-7:
                    deps[te.arc_time[ai]] = deps.get(te.arc_time[ai], 0.0) + v
        if deps:
            rows.append((k, route, sorted(deps.items())))
    return rows


def solve_rf_variant(variant: str, g: EvacuationGraph, te: TimeExpandedGraph,
                     budget: SolveBudget | None = None, *,
                     var_budget: int = DEFAULT_VAR_BUDGET,
                     unserved_penalty: float | None = None) -> RfResult:
    """variant in {'base', 'E', 'I'}.

    base maximizes evacuated volume; E re-solves with the volume floored at
    the base optimum and the first origin departure pushed as late as
    possible; I prices early departures and unserved demand in one solve
    (requires an expansion built with with_overflow=True).
    """
    if variant not in ("base", "E", "I"):
        raise ValueError(f"unknown RF variant {variant!r}")
    if variant == "I" and not te.has_overflow:
        raise ValueError("variant 'I' needs with_overflow=True")
    budget = budget or SolveBudget()
    t0 = time.time()
    h = build_rf(g, te, var_budget=var_budget)
    m = h.model

    if variant == "I":
        c_ne = float(unserved_penalty) if unserved_penalty is not None \
            else float(g.horizon)
        m.sense = "min"
        for (ai, k), j in h.f_of.items():
            kind = te.arc_kind[ai]
            if kind == ARC_MOVE and \
                    g.nodes[te.split(te.arc_tail[ai])[0]].kind is NodeKind.EVACUATED:
                m.obj[j] = departure_cost(g.horizon, te.arc_time[ai])
            elif kind == ARC_OVERFLOW:
                m.obj[j] = c_ne
            elif kind == ARC_SOURCE:
                m.obj[j] = 0.0
                m.lb[j] = te.arc_cap[ai]   # all demand leaves the source
            else:
                m.obj[j] = 0.0

    sol = solve_mip(m, budget)
    name = {"base": "rf", "E": "rf-e", "I": "rf-i"}[variant]
    if sol.x is None:
        empty = plan_from_assignments(g, name, [])
        return RfResult(plan=empty, phi=0.0, delta_step=0, objective=None,
                        bound=sol.bound, gap=sol.gap, status=sol.status.value,
                        wall_time=time.time() - t0)

    if variant == "E":
        phi_star = sol.objective
        d_ub = delta_upper_bound(g)
        for j in range(m.num_vars):
            m.obj[j] = 0.0
        sink_terms = [(j, 1.0) for (ai, k), j in h.f_of.items()
                      if te.arc_kind[ai] == ARC_SINK]
        m.add_constr(sink_terms, ">=", phi_star - 1e-7, name="volume_floor")
        dvar = m.add_var(lb=0.0, ub=float(d_ub), obj=1.0,
                         name="first_departure")
        dep_vars_by_t: dict[int, list[int]] = {}
        for (ai, k), j in h.f_of.items():
            if te.arc_kind[ai] == ARC_MOVE and te.split(te.arc_tail[ai])[0] == k:
                dep_vars_by_t.setdefault(te.arc_time[ai], []).append(j)
        for t in range(0, d_ub + 1):
            js = dep_vars_by_t.get(t, [])
            beta = m.add_var(lb=0.0, ub=1.0, integer=True, name=f"beta{t}")
            if js:
                cap_sum = sum(min(m.ub[j], g.total_demand()) for j in js)
                m.add_constr([(j, 1.0) for j in js] + [(beta, -cap_sum)],
                             "<=", 0.0, name=f"gate{t}")
            m.add_constr([(dvar, 1.0), (beta, float(d_ub - t))], "<=",
                         float(d_ub), name=f"push{t}")
        sol = solve_mip(m, budget)
        if sol.x is None:
            empty = plan_from_assignments(g, name, [])
            return RfResult(plan=empty, phi=0.0, delta_step=0, objective=None,
                            bound=sol.bound, gap=sol.gap,
                            status=sol.status.value,
                            wall_time=time.time() - t0)

    rows = _extract_plan(g, te, h, sol.x)
    plan = plan_from_assignments(g, name, rows, objective=sol.objective,
                                 meta={"status": sol.status.value,
                                       "gap": sol.gap, "bound": sol.bound})
    deps = [t for _, _, dl in rows for t, _ in dl]
    delta = min(deps) if deps else delta_upper_bound(g)
    return RfResult(plan=plan, phi=plan.phi, delta_step=delta,
                    objective=sol.objective, bound=sol.bound, gap=sol.gap,
                    status=sol.status.value, wall_time=time.time() - t0)
