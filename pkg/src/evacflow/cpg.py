"""Conflict-driven path generation: the production planner.

The loop alternates between a scheduling master over a small pool of
candidate routes and a cheap pricing step that adds routes for origins in
conflict.  The master picks one route per origin (binaries), schedules
departures along it (continuous, one variable per step in the route's
window), and accounts for demand that stays behind.  Capacity rows exist per
(road, entry step) pair but are materialized lazily: a lone schedule
variable can never exceed its own route's bottleneck, so only pairs loaded
by two or more (route, departure) combinations get a row — created the
moment a pooled route makes the pair shareable.  A post-solve violation
sweep backstops the bookkeeping, and every returned plan is re-audited
against the full set.  Should the loop stall while the whole route universe
still fits a small column budget, a finishing sweep pools everything left
and solves once more — tiny instances end exact, large ones never pay.

Costs steering the pricing step blend normalized travel time, how often an
edge already occurs in the pool, and its cumulative scheduled utilization;
new routes are cheapest paths under those costs with seeded jitter breaking
ties, so a fixed seed is fully deterministic.

Variants: ``run_cpg`` (volume or implicit objective), ``run_cpg_e``
(two-phase: volume first, then push the first departure as late as the
volume allows, still generating paths), and ``run_cpg_bar`` (static
single-direction edge binaries layered on the master).
"""

from __future__ import annotations

import heapq
import math
import random
import time
from dataclasses import dataclass, field

import numpy as np

from .graph import (EvacPath, EvacuationGraph, NodeKind, TimeExpandedGraph,
                    edge_departure_ub, enumerate_simple_paths, make_path)
from .flows import delta_upper_bound, departure_cost
from .lp import (LpModel, LpSolution, SolveBudget, SolveStatus, solve_mip,
                 warm_start)
from .plans import EvacuationPlan, plan_from_assignments

_TOL = 1e-9
_CAP_TOL = 1e-7


@dataclass(frozen=True)
class CostWeights:
    alpha_t: float = 0.4
    alpha_c: float = 0.2
    alpha_u: float = 0.4

    def __post_init__(self) -> None:
        for v in (self.alpha_t, self.alpha_c, self.alpha_u):
            if v < 0:
                raise ValueError("cost weights must be non-negative")
        s = self.alpha_t + self.alpha_c + self.alpha_u
        if abs(s - 1.0) > 1e-9:
            raise ValueError(f"cost weights must sum to 1, got {s}")


@dataclass
class CpgConfig:
    max_iterations: int = 50
    max_non_improving: int = 10
    weights: CostWeights = field(default_factory=CostWeights)
    seed: int = 0
    time_limit: float | None = None         # wall clock for the whole loop
    master_time_limit: float | None = None  # per master solve
    unserved_penalty: float | None = None   # implicit objective; default horizon
    lenient_expiry: bool = False
    exhaustive_init: bool = False           # pool every simple path up front
    init_max_paths: int = 64
    init_max_edges: int = 16
    final_sweep: bool = True                # finish small pools exhaustively
    sweep_column_budget: int = 4096


class PathPool:
    """Routes considered so far, with incumbent usage per route."""

    def __init__(self) -> None:
        self.paths: list[EvacPath] = []
        self.by_origin: dict[int, list[int]] = {}
        self.usage: list[float] = []        # scheduled volume in the incumbent
        self._keys: set = set()

    def __len__(self) -> int:
        return len(self.paths)

    def add(self, p: EvacPath) -> int | None:
        key = p.key()
        if key in self._keys:
            return None
        self._keys.add(key)
        self.paths.append(p)
        self.usage.append(0.0)
        self.by_origin.setdefault(p.origin, []).append(len(self.paths) - 1)
        return len(self.paths) - 1

    def set_usage(self, flows: dict[int, float]) -> None:
        for i in range(len(self.usage)):
            self.usage[i] = flows.get(i, 0.0)


def edge_costs(g: EvacuationGraph, pool: PathPool,
               w: CostWeights | None = None) -> list[float]:
    """Per static edge: normalized travel + pool occurrence + utilization.

    Terms with an empty denominator (no pooled paths, zero capacity, all-zero
    travel times) contribute 0, so the very first call prices pure travel."""
    w = w or CostWeights()
    max_tau = max((e.travel_time for e in g.edges), default=0)
    n_pool = len(pool)
    occ = [0] * len(g.edges)
    util_flow = [0.0] * len(g.edges)
    for i, p in enumerate(pool.paths):
        for e in p.edges:
            occ[e] += 1
            util_flow[e] += pool.usage[i]
    out = []
    for ei, e in enumerate(g.edges):
        c = 0.0
        if max_tau > 0:
            c += w.alpha_t * e.travel_time / max_tau
        if n_pool > 0:
            c += w.alpha_c * occ[ei] / n_pool
        if e.capacity > 0:
            c += w.alpha_u * util_flow[ei] / e.capacity
        out.append(c)
    return out


def generate_paths(g: EvacuationGraph, targets, costs: list[float],
                   rng: random.Random, pool: PathPool, *,
                   lenient_expiry: bool = False,
                   banned_edges: frozenset[int] | set[int] = frozenset()
                   ) -> tuple[list[EvacPath], list[int]]:
    """Cheapest origin->any-safe route per target under ``costs``.

    Ties are broken by a seeded jitter well below any real cost difference.
    Routes whose departure window is empty, and routes already pooled, are
    dropped; targets that cannot reach safety at all are reported back."""
    safe = set(g.safe_ids())
    usable = [e.capacity > 0 and edge_departure_ub(
        g, ei, lenient_expiry=lenient_expiry) >= 0 and e.tail not in safe
        and ei not in banned_edges
        for ei, e in enumerate(g.edges)]
    jitter = [rng.random() * 1e-9 for _ in g.edges]
    new_paths: list[EvacPath] = []
    unsatisfiable: list[int] = []
    for k in sorted(targets):
        route = _cheapest_route(g, k, costs, jitter, usable, safe)
        if route is None:
            unsatisfiable.append(k)
            continue
        p = make_path(g, k, route, lenient_expiry=lenient_expiry)
        if p is None or p.key() in pool._keys:
            continue
        new_paths.append(p)
    return new_paths, unsatisfiable


def _cheapest_route(g: EvacuationGraph, k: int, costs, jitter, usable, safe
                    ) -> tuple[int, ...] | None:
    dist: dict[int, float] = {k: 0.0}
    prev: dict[int, int] = {}
    heap: list[tuple[float, int]] = [(0.0, k)]
    goal = None
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist.get(u, math.inf) + 1e-15:
            continue
        if u in safe:
            goal = u
            break
        for ei in g.out_edges[u]:
            if not usable[ei]:
                continue
            v = g.edges[ei].head
            nd = d + costs[ei] + jitter[ei]
            if nd < dist.get(v, math.inf) - 1e-15:
                dist[v] = nd
                prev[v] = ei
                heapq.heappush(heap, (nd, v))
    if goal is None:
        return None
    route = []
    u = goal
    while u != k:
        ei = prev[u]
        route.append(ei)
        u = g.edges[ei].tail
    route.reverse()
    return tuple(route)


def _diversified_path(g: EvacuationGraph, k: int, costs: list[float],
                      rng: random.Random, pool: PathPool, *,
                      lenient_expiry: bool,
                      first_banned: set[int],
                      rounds: int = 8) -> EvacPath | None:
    """Next usable route for ``k`` when its cheapest one is already pooled.

    First tries with the conflict edges closed; afterwards each rejected
    route has its edges' costs bumped past everything else, so successive
    tries walk progressively more distinct routes in near-cost order."""
    safe = set(g.safe_ids())
    base_usable = [e.capacity > 0 and edge_departure_ub(
        g, ei, lenient_expiry=lenient_expiry) >= 0 and e.tail not in safe
        for ei, e in enumerate(g.edges)]
    jitter = [rng.random() * 1e-9 for _ in g.edges]
    cost_k = list(costs)
    bump = 1.0 + max(cost_k, default=0.0)
    banned = set(first_banned)
    for _ in range(rounds):
        usable = [u and ei not in banned
                  for ei, u in enumerate(base_usable)]
        route = _cheapest_route(g, k, cost_k, jitter, usable, safe)
        if route is None:
            if banned:
                banned = set()
                continue
            return None
        p = make_path(g, k, route, lenient_expiry=lenient_expiry)
        if p is not None and p.key() not in pool._keys:
            return p
        banned = set()
        for e in route:
            cost_k[e] += bump
    return None


# -- the scheduling master -----------------------------------------------------


@dataclass
class MasterPlan:
    chosen: dict[int, int]                       # origin -> pool index
    departures: dict[int, list[tuple[int, float]]]  # pool index -> schedule
    slack: dict[int, float]                      # origin -> left-behind volume
    objective: float
    phi: float
    delta: int
    status: str
    path_flow: dict[int, float]                  # pool index -> total volume


class _Master:
    """Incrementally grown scheduling MIP with lazy capacity rows."""

    def __init__(self, g: EvacuationGraph, pool: PathPool, objective: str,
                 unserved_penalty: float | None = None,
                 static_choice: bool = False) -> None:
        assert objective in ("maxflow", "implicit")
        self.g = g
        self.pool = pool
        self.objective = objective
        self.static_choice = static_choice
        self.c_ne = float(unserved_penalty) if unserved_penalty is not None \
            else float(g.horizon)
        sense = "min" if objective == "implicit" else "max"
        self.m = LpModel(sense=sense, name=f"cpg-{objective}")
        self.x_of: dict[int, int] = {}
        self.phi_of: dict[int, dict[int, int]] = {}
        self.slack_of: dict[int, int] = {}
        self.demand_row: dict[int, int] = {}
        self.onepath_row: dict[int, int] = {}
        self.cap_row: dict[tuple[int, int], int] = {}
        # every schedule variable loading (edge, entry step), in add order
        self._pair_vars: dict[tuple[int, int], list[int]] = {}
        self.prev: LpSolution | None = None
        self.origins = [k for k in g.evacuated_ids() if g.nodes[k].demand > 0]
        for k in self.origins:
            obj = self.c_ne if objective == "implicit" else 0.0
            self.slack_of[k] = self.m.add_var(lb=0.0, ub=g.nodes[k].demand,
                                              obj=obj, name=f"ne_k{k}")
            self.demand_row[k] = self.m.add_constr(
                [(self.slack_of[k], 1.0)], "=", g.nodes[k].demand,
                name=f"dem_k{k}")
        # single-direction static-edge state (bar variant)
        self.z_of: dict[int, int] = {}
        self.branch_row: dict[int, int] = {}     # transit node -> row
        self._antiparallel: set[tuple[int, int]] = set()
        # first-departure phase state (E variant, enable_delta_phase)
        self.delta_var: int | None = None
        self.gate_row: dict[int, int] = {}
        self.floor_row: int | None = None
        self.d_ub = delta_upper_bound(g)

    # -- growth ---------------------------------------------------------------

    def _ensure_z(self, e: int) -> int:
        if e in self.z_of:
            return self.z_of[e]
        m = self.m
        z = m.add_var(lb=0.0, ub=1.0, integer=True, name=f"z_e{e}")
        self.z_of[e] = z
        edge = self.g.edges[e]
        for node, sign in ((edge.tail, 1.0), (edge.head, -1.0)):
            if self.g.nodes[node].kind is not NodeKind.TRANSIT:
                continue
            rid = self.branch_row.get(node)
            if rid is None:
                rid = m.add_constr([(z, sign)], "<=", 0.0,
                                   name=f"branch_n{node}")
                self.branch_row[node] = rid
            else:
                m.add_term_to_row(rid, z, sign)
        rev = next((e2 for e2 in self.g.out_edges[edge.head]
                    if self.g.edges[e2].head == edge.tail), None)
        if rev is not None and rev in self.z_of:
            pair = (min(e, rev), max(e, rev))
            if pair not in self._antiparallel:
                self._antiparallel.add(pair)
                m.add_constr([(z, 1.0), (self.z_of[rev], 1.0)], "<=", 1.0,
                             name=f"oneway_e{pair[0]}_e{pair[1]}")
        return z

    def add_path(self, idx: int) -> None:
        p = self.pool.paths[idx]
        m = self.m
        x = m.add_var(lb=0.0, ub=1.0, integer=True, name=f"x_p{idx}")
        self.x_of[idx] = x
        phis: dict[int, int] = {}
        for t in p.window:
            obj = 0.0
            if self.objective == "maxflow" and self.delta_var is None:
                obj = 1.0
            elif self.objective == "implicit":
                obj = departure_cost(self.g.horizon, t)
            phis[t] = m.add_var(lb=0.0, ub=p.capacity, obj=obj,
                                name=f"f_p{idx}_t{t}")
        self.phi_of[idx] = phis
        k = p.origin
        for t, j in sorted(phis.items()):
            m.add_term_to_row(self.demand_row[k], j, 1.0)
        if k not in self.onepath_row:
            self.onepath_row[k] = m.add_constr([(x, 1.0)], "=", 1.0,
                                               name=f"onepath_k{k}")
        else:
            m.add_term_to_row(self.onepath_row[k], x, 1.0)
        big = len(p.window) * p.capacity
        m.add_constr([(j, 1.0) for j in phis.values()] + [(x, -big)],
                     "<=", 0.0, name=f"pflow_p{idx}")
        # existing capacity rows must stay complete as the pool grows, and a
        # pair that just became shareable needs its row before the next solve
        for e, off in zip(p.edges, p.offsets):
            for t in p.window:
                key = (e, t + off)
                loaders = self._pair_vars.setdefault(key, [])
                loaders.append(phis[t])
                rid = self.cap_row.get(key)
                if rid is not None:
                    m.add_term_to_row(rid, phis[t], 1.0)
                elif len(loaders) > 1:
                    self._materialize(e, t + off)
        if self.floor_row is not None:
            for t, j in sorted(phis.items()):
                m.add_term_to_row(self.floor_row, j, 1.0)
        if self.delta_var is not None:
            for t, j in phis.items():
                rid = self.gate_row.get(t)
                if rid is not None:
                    m.add_term_to_row(rid, j, 1.0)
        if self.static_choice:
            for e in sorted(set(p.edges)):
                z = self._ensure_z(e)
                m.add_constr([(x, 1.0), (z, -1.0)], "<=", 0.0,
                             name=f"open_p{idx}_e{e}")

    def _materialize(self, e: int, s: int) -> None:
        terms = [(j, 1.0) for j in self._pair_vars.get((e, s), ())]
        self.cap_row[(e, s)] = self.m.add_constr(
            terms, "<=", self.g.edges[e].capacity, name=f"cap_e{e}_s{s}")

    def enable_delta_phase(self, phi_floor: float) -> None:
        """Flip the objective to pushing the first departure late while
        keeping at least ``phi_floor`` evacuated."""
        m = self.m
        for j in range(m.num_vars):
            m.obj[j] = 0.0
        m.sense = "max"
        all_phi = [(j, 1.0) for _, phis in sorted(self.phi_of.items())
                   for j in phis.values()]
        self.floor_row = m.add_constr(all_phi, ">=", phi_floor - 1e-7,
                                      name="volume_floor")
        self.delta_var = m.add_var(lb=0.0, ub=float(self.d_ub), obj=1.0,
                                   name="first_departure")
        big = self.g.total_demand()
        for t in range(0, self.d_ub + 1):
            beta = m.add_var(lb=0.0, ub=1.0, integer=True, name=f"beta{t}")
            terms = [(phis[t], 1.0) for _, phis in sorted(self.phi_of.items())
                     if t in phis]
            self.gate_row[t] = m.add_constr(terms + [(beta, -big)], "<=", 0.0,
                                            name=f"gate{t}")
            m.add_constr([(self.delta_var, 1.0), (beta, float(self.d_ub - t))],
                         "<=", float(self.d_ub), name=f"push{t}")
        self.prev = None   # objective changed; the old basis prices wrong

    # -- solving ---------------------------------------------------------------

    def _fallback_incumbent(self) -> np.ndarray:
        """All demand stays behind, first pooled route per origin selected;
        feasible by construction so a timed-out master still returns a plan."""
        x = np.zeros(self.m.num_vars)
        for k in self.origins:
            x[self.slack_of[k]] = self.g.nodes[k].demand
        for k in self.onepath_row:
            first = min(i for i in self.pool.by_origin.get(k, [])
                        if i in self.x_of)
            x[self.x_of[first]] = 1.0
            if self.static_choice:
                for e in set(self.pool.paths[first].edges):
                    x[self.z_of[e]] = 1.0
        return x

    def solve(self, budget: SolveBudget) -> MasterPlan:
        t_end = None if budget.time_limit is None \
            else time.monotonic() + budget.time_limit
        if self.prev is not None:
            warm_start(self.m, self.prev)
        elif self.delta_var is None:
            self.m._warm_x = self._fallback_incumbent()
        sol = None
        for _round in range(200):
            left = None if t_end is None else max(t_end - time.monotonic(), 0.1)
            sol = solve_mip(self.m, SolveBudget(time_limit=left,
                                                gap=budget.gap))
            if sol.x is None:
                break
            viol = self._violations(sol.x)
            if not viol:
                break
            for e, s in viol:
                self._materialize(e, s)
            warm_start(self.m, sol)
        if sol is None or sol.x is None:
            raise RuntimeError(
                f"master ended {sol.status.value if sol else '?'} "
                "without a plan")
        self.prev = sol
        return self._to_plan(sol)

    def _violations(self, x) -> list[tuple[int, int]]:
        load: dict[tuple[int, int], float] = {}
        for idx, phis in self.phi_of.items():
            p = self.pool.paths[idx]
            for t, j in phis.items():
                v = x[j]
                if v <= _TOL:
                    continue
                for e, off in zip(p.edges, p.offsets):
                    key = (e, t + off)
                    load[key] = load.get(key, 0.0) + v
        out = []
        for (e, s), v in load.items():
            if v > self.g.edges[e].capacity + _CAP_TOL \
                    and (e, s) not in self.cap_row:
                out.append((e, s))
        return sorted(out)

    def _to_plan(self, sol: LpSolution) -> MasterPlan:
        x = sol.x
        chosen = {}
        for idx, xv in self.x_of.items():
            if x[xv] > 0.5:
                chosen[self.pool.paths[idx].origin] = idx
        departures: dict[int, list[tuple[int, float]]] = {}
        path_flow: dict[int, float] = {}
        phi = 0.0
        delta = None
        for idx, phis in self.phi_of.items():
            sched = [(t, float(x[j])) for t, j in sorted(phis.items())
                     if x[j] > 1e-7]
            if sched:
                departures[idx] = sched
                tot = sum(v for _, v in sched)
                path_flow[idx] = tot
                phi += tot
                dmin = min(t for t, _ in sched)
                delta = dmin if delta is None else min(delta, dmin)
        slack = {k: float(x[self.slack_of[k]]) for k in self.origins}
        return MasterPlan(chosen=chosen, departures=departures, slack=slack,
                          objective=float(sol.objective), phi=phi,
                          delta=delta if delta is not None else self.d_ub,
                          status=sol.status.value, path_flow=path_flow)

    @property
    def columns(self) -> int:
        return self.m.num_vars

    @property
    def rows_materialized(self) -> int:
        return self.m.num_rows

    @property
    def rows_full_space(self) -> int:
        """Rows if every (edge, step) capacity pair were materialized."""
        full_caps = len(self.g.edges) * (self.g.horizon + 1)
        return self.m.num_rows - len(self.cap_row) + full_caps


def find_critical_nodes(g: EvacuationGraph, pool: PathPool, plan: MasterPlan,
                        *, implicit: bool = False,
                        eps: float = 1e-6) -> set[int]:
    """Origins to generate new routes for.

    Not-fully-evacuated origins; origins whose chosen route shares a road
    with one of those; and, under the implicit objective, origins that left
    earlier than the residual capacity forced them to."""
    starved = {k for k, v in plan.slack.items() if v > eps}
    crit = set(starved)
    starved_edges: set[int] = set()
    for k in starved:
        idx = plan.chosen.get(k)
        if idx is not None:
            starved_edges.update(pool.paths[idx].edges)
    for k, idx in plan.chosen.items():
        if k in crit:
            continue
        if starved_edges.intersection(pool.paths[idx].edges):
            crit.add(k)
    if implicit:
        crit |= _early_leavers(g, pool, plan, eps)
    return crit


def _conflict_edges(g: EvacuationGraph, pool: PathPool, plan: MasterPlan,
                    k: int, eps: float = 1e-7) -> set[int]:
    """Edges worth steering origin ``k`` around: saturated edges of its own
    chosen route, plus edges it shares with a starved origin's route."""
    load: dict[tuple[int, int], float] = {}
    for idx, sched in plan.departures.items():
        p = pool.paths[idx]
        for t, v in sched:
            for e, off in zip(p.edges, p.offsets):
                load[(e, t + off)] = load.get((e, t + off), 0.0) + v
    sat: set[int] = set()
    for (e, s), v in load.items():
        if v >= g.edges[e].capacity - eps:
            sat.add(e)
    out: set[int] = set()
    idx = plan.chosen.get(k)
    if idx is not None:
        own = set(pool.paths[idx].edges)
        out |= own & sat
        for j, v in plan.slack.items():
            if j != k and v > 1e-6 and plan.chosen.get(j) is not None:
                out |= own & set(pool.paths[plan.chosen[j]].edges)
    return out


def _early_leavers(g: EvacuationGraph, pool: PathPool, plan: MasterPlan,
                   eps: float) -> set[int]:
    """Origins whose first departure is more than one step earlier than a
    latest-possible repack of their own volume into the capacity left over
    by everyone else."""
    load: dict[tuple[int, int], float] = {}
    for idx, sched in plan.departures.items():
        p = pool.paths[idx]
        for t, v in sched:
            for e, off in zip(p.edges, p.offsets):
                load[(e, t + off)] = load.get((e, t + off), 0.0) + v
    out: set[int] = set()
    for k, idx in plan.chosen.items():
        sched = plan.departures.get(idx)
        if not sched:
            continue
        p = pool.paths[idx]
        vol = sum(v for _, v in sched)
        own: dict[tuple[int, int], float] = {}
        for t, v in sched:
            for e, off in zip(p.edges, p.offsets):
                own[(e, t + off)] = own.get((e, t + off), 0.0) + v
        remaining = vol
        first_late = None
        for t in reversed(p.window):
            room = min(
                g.edges[e].capacity
                - (load.get((e, t + off), 0.0) - own.get((e, t + off), 0.0))
                for e, off in zip(p.edges, p.offsets))
            take = min(max(room, 0.0), remaining)
            if take > eps:
                first_late = t
                remaining -= take
            if remaining <= eps:
                break
        if remaining > eps or first_late is None:
            continue   # cannot repack: not "early"
        actual_first = min(t for t, _ in sched)
        if actual_first < first_late - 1:
            out.add(k)
    return out


# -- the outer loops ------------------------------------------------------------


@dataclass
class CpgResult:
    plan: EvacuationPlan
    phi: float
    delta_step: int
    objective: float
    percent: float
    iterations: int
    pool_size: int
    columns: int
    rows_materialized: int
    rows_full_space: int
    history: list[float]
    status: str
    unsatisfiable: list[int]
    wall_time: float


def _emit_plan(g: EvacuationGraph, pool: PathPool, mp: MasterPlan,
               model_name: str, extra_meta: dict) -> EvacuationPlan:
    rows = []
    for k, idx in sorted(mp.chosen.items()):
        sched = mp.departures.get(idx)
        if not sched:
            continue
        rows.append((k, pool.paths[idx].edges, sched))
    return plan_from_assignments(g, model_name, rows, objective=mp.objective,
                                 meta=extra_meta)


class _Loop:
    """Shared iterate-generate-schedule machinery for all variants."""

    def __init__(self, g: EvacuationGraph, config: CpgConfig, master: _Master,
                 pool: PathPool, rng: random.Random,
                 t_end: float | None) -> None:
        self.g = g
        self.config = config
        self.master = master
        self.pool = pool
        self.rng = rng
        self.t_end = t_end
        self.unsat: list[int] = []
        self.history: list[float] = []
        self.status = "Optimal"
        self.iterations = 0

    def remaining(self) -> float | None:
        cfg = self.config
        if self.t_end is None:
            return cfg.master_time_limit
        left = max(self.t_end - time.monotonic(), 0.5)
        if cfg.master_time_limit is not None:
            return min(left, cfg.master_time_limit)
        return left

    def grow(self, targets, plan: MasterPlan | None = None) -> int:
        if not targets:
            return 0
        costs = edge_costs(self.g, self.pool, self.config.weights)
        fresh, bad = generate_paths(self.g, targets, costs, self.rng,
                                    self.pool,
                                    lenient_expiry=self.config.lenient_expiry)
        self.unsat.extend(b for b in bad if b not in self.unsat)
        n = 0
        served = set()
        for p in fresh:
            idx = self.pool.add(p)
            if idx is not None:
                self.master.add_path(idx)
                served.add(p.origin)
                n += 1
        if plan is not None:
            # origins whose cheapest route is already pooled get further
            # tries: first with their conflict edges closed off, then down
            # the next-cheapest routes until a genuinely new one turns up
            for k in sorted(set(targets) - served):
                avoid = _conflict_edges(self.g, self.pool, plan, k)
                p = _diversified_path(
                    self.g, k, costs, self.rng, self.pool,
                    lenient_expiry=self.config.lenient_expiry,
                    first_banned=avoid)
                if p is None:
                    continue
                idx = self.pool.add(p)
                if idx is not None:
                    self.master.add_path(idx)
                    n += 1
        return n

    def seed_pool(self) -> None:
        cfg = self.config
        if cfg.exhaustive_init:
            for k in self.master.origins:
                for route in enumerate_simple_paths(
                        self.g, k, max_paths=cfg.init_max_paths,
                        max_edges=cfg.init_max_edges):
                    p = make_path(self.g, k, route,
                                  lenient_expiry=cfg.lenient_expiry)
                    if p is not None:
                        idx = self.pool.add(p)
                        if idx is not None:
                            self.master.add_path(idx)
        else:
            self.grow(self.master.origins)

    def run(self, *, implicit: bool, better, critical) -> MasterPlan:
        cfg = self.config
        best: MasterPlan | None = None
        non_improving = 0
        for it in range(cfg.max_iterations):
            self.iterations += 1
            mp = self.master.solve(SolveBudget(time_limit=self.remaining()))
            self.pool.set_usage(mp.path_flow)
            self.history.append(mp.objective)
            if best is None or better(mp, best):
                best = mp
                non_improving = 0
            else:
                non_improving += 1
            if mp.status != "Optimal":
                self.status = mp.status
                break
            if self.t_end is not None and time.monotonic() >= self.t_end:
                self.status = "TimeLimit"
                break
            if non_improving >= cfg.max_non_improving:
                break
            crit = critical(mp)
            if not crit:
                break
            grown = self.grow(crit, mp)
            if grown == 0:
                # pricing for the critical set is exhausted, but a better
                # plan may need a well-served origin to step off an edge a
                # starved one wants; give the others one diversified try
                rest = [k for k in self.master.origins if k not in crit]
                grown = self.grow(rest, mp)
            if grown == 0:
                break   # nothing new to say about the conflicts
        assert best is not None
        if cfg.final_sweep and self.status == "Optimal" and (
                self.t_end is None or time.monotonic() < self.t_end):
            if self._sweep_missing() > 0:
                self.iterations += 1
                mp = self.master.solve(SolveBudget(time_limit=self.remaining()))
                self.pool.set_usage(mp.path_flow)
                self.history.append(mp.objective)
                if better(mp, best):
                    best = mp
                if mp.status != "Optimal":
                    self.status = mp.status
        return best

    def _sweep_missing(self) -> int:
        """Finish off a small pool: when every simple route left unexplored
        still fits a modest column budget, add them all and let one last
        master solve settle the matter instead of stalling short."""
        cfg = self.config
        room = cfg.sweep_column_budget - self.master.columns
        if room <= 0:
            return 0
        found: list[EvacPath] = []
        for k in self.master.origins:
            for route in enumerate_simple_paths(self.g, k,
                                                max_paths=cfg.init_max_paths,
                                                max_edges=cfg.init_max_edges):
                p = make_path(self.g, k, route,
                              lenient_expiry=cfg.lenient_expiry)
                if p is None or p.key() in self.pool._keys:
                    continue
                room -= len(p.window) + 1
                if room < 0:
                    return 0    # all or nothing: no point in a partial sweep
                found.append(p)
        n = 0
        for p in found:
            idx = self.pool.add(p)
            if idx is not None:
                self.master.add_path(idx)
                n += 1
        return n

    def result(self, best: MasterPlan, model_name: str,
               t0: float) -> CpgResult:
        g, master, pool = self.g, self.master, self.pool
        total = g.total_demand()
        meta = {"iterations": self.iterations, "pool_size": len(pool),
                "columns": master.columns,
                "rows_materialized": master.rows_materialized,
                "rows_full_space": master.rows_full_space,
                "status": self.status, "unsatisfiable": sorted(self.unsat),
                "delta_step": best.delta}
        plan = _emit_plan(g, pool, best, model_name, meta)
        return CpgResult(plan=plan, phi=best.phi, delta_step=best.delta,
                         objective=best.objective,
                         percent=100.0 * best.phi / total if total else 100.0,
                         iterations=self.iterations, pool_size=len(pool),
                         columns=master.columns,
                         rows_materialized=master.rows_materialized,
                         rows_full_space=master.rows_full_space,
                         history=list(self.history), status=self.status,
                         unsatisfiable=sorted(self.unsat),
                         wall_time=time.monotonic() - t0)


def _better_volume(a: MasterPlan, b: MasterPlan) -> bool:
    if a.phi > b.phi + 1e-9:
        return True
    if a.phi < b.phi - 1e-9:
        return False
    return a.delta > b.delta


def _better_implicit(a: MasterPlan, b: MasterPlan) -> bool:
    return a.objective < b.objective - 1e-9


def _better_delta(a: MasterPlan, b: MasterPlan) -> bool:
    return a.objective > b.objective + 1e-9


def run_cpg(g: EvacuationGraph, te: TimeExpandedGraph | None = None,
            config: CpgConfig | None = None, *,
            objective: str = "maxflow",
            static_choice: bool = False) -> CpgResult:
    """Iterate pricing and scheduling until no conflicts or budgets end.

    objective 'maxflow' maximizes evacuated volume; 'implicit' minimizes
    departure-delay cost plus a penalty per person left behind (the
    single-solve lateness-aware variant)."""
    if objective not in ("maxflow", "implicit"):
        raise ValueError(f"unknown objective {objective!r}")
    config = config or CpgConfig()
    t0 = time.monotonic()
    t_end = None if config.time_limit is None else t0 + config.time_limit
    rng = random.Random(config.seed)
    pool = PathPool()
    master = _Master(g, pool, objective,
                     unserved_penalty=config.unserved_penalty,
                     static_choice=static_choice)
    loop = _Loop(g, config, master, pool, rng, t_end)
    loop.seed_pool()
    implicit = objective == "implicit"
    best = loop.run(
        implicit=implicit,
        better=_better_implicit if implicit else _better_volume,
        critical=lambda mp: find_critical_nodes(g, pool, mp,
                                                implicit=implicit))
    if static_choice:
        name = "cpg-bar"
    else:
        name = "cpg-i" if implicit else "cpg"
    return loop.result(best, name, t0)


def run_cpg_bar(g: EvacuationGraph, te: TimeExpandedGraph | None = None,
                config: CpgConfig | None = None) -> CpgResult:
    """Volume objective with every used road locked to one direction and
    transit nodes barred from fanning out beyond what feeds them."""
    return run_cpg(g, te, config, objective="maxflow", static_choice=True)


def run_cpg_e(g: EvacuationGraph, te: TimeExpandedGraph | None = None,
              config: CpgConfig | None = None) -> CpgResult:
    """Volume first, then the latest possible first departure at that
    volume; path generation continues inside the second phase."""
    config = config or CpgConfig()
    t0 = time.monotonic()
    t_end = None if config.time_limit is None else t0 + config.time_limit
    rng = random.Random(config.seed)
    pool = PathPool()
    master = _Master(g, pool, "maxflow",
                     unserved_penalty=config.unserved_penalty)
    loop = _Loop(g, config, master, pool, rng, t_end)
    loop.seed_pool()
    best1 = loop.run(
        implicit=False, better=_better_volume,
        critical=lambda mp: find_critical_nodes(g, pool, mp))
    phase1_hist = list(loop.history)

    master.enable_delta_phase(best1.phi)

    def critical_e(mp: MasterPlan) -> set[int]:
        crit = find_critical_nodes(g, pool, mp)
        # origins pinning the first departure are the binding ones here
        for idx, sched in mp.departures.items():
            if sched and min(t for t, _ in sched) <= mp.delta:
                crit.add(pool.paths[idx].origin)
        return crit

    loop.history = []
    best2 = loop.run(implicit=False, better=_better_delta,
                     critical=critical_e)
    loop.history = phase1_hist + loop.history
    res = loop.result(best2, "cpg-e", t0)
    res.plan.meta["phase1_phi"] = best1.phi
    return res
