"""Discrete-time queue simulator for stress-testing evacuation plans.

Every evacuee is an agent with an individual plan: an origin, a final safe
node, an edge route, and a departure step.  Edges behave as FIFO queues with
bounded storage and a bounded per-step outflow, which is what produces
congestion when a schedule is too optimistic for the network it runs on.

All behavioural randomness — rushed or randomized departures, rerouted
destinations — is applied to the population up front by ``apply_scenario``;
the stepping engine itself is deterministic, so the same population always
replays to the same result.  Rerouted agents take earliest-arrival routes
computed on the empty network: evacuees do not anticipate congestion, which
is exactly the stress these scenarios exist to apply.

Engine conventions, chosen once and pinned for reproducibility:

* storage: an edge carries at most ``max(floor(u_e * tau_e), 1)`` agents
  still in transit; agents that have finished traversing but are waiting for
  their turn to exit stand at the edge's head, where (as at origins) there
  is no standing-room limit.  A schedule that feeds an edge at exactly its
  capacity therefore replays cleanly, while anything above it backs up;
* outflow: at most ``u_e`` agents leave an edge per step, enforced through a
  per-edge credit accumulator (capped at one step's worth) so fractional
  capacities still release agents at the right long-run rate;
* discipline: strict FIFO per edge with head-of-line blocking — if the front
  agent cannot move (next road packed solid, or closed for good), nobody
  behind it moves either;
* merges: edges take turns going first via a step-rotated processing order,
  so no inbound road permanently starves another at a junction;
* departures: an agent blocked at its origin retries every step while its
  first edge still admits new traffic; once the departure gate has passed
  (deadline, expiry or horizon), the agent is marked not evacuated.
"""

from __future__ import annotations

import heapq
import json
import math
import random
from collections import deque
from dataclasses import dataclass, field

from .graph import EvacuationGraph, NodeKind, edge_departure_ub
from .plans import EvacuationPlan

SCENARIOS = ("as-planned", "rush", "random-schedule", "random-plan",
             "closest", "closest-volume-matched", "random-closest")


def canonical_scenario(name: str) -> str:
    s = name.strip().lower().replace("_", "-").replace(" ", "-")
    if s not in SCENARIOS:
        raise ValueError(f"unknown scenario {name!r}; pick one of "
                         f"{', '.join(SCENARIOS)}")
    return s


# -- agents ------------------------------------------------------------------


@dataclass
class AgentPlan:
    """One evacuee: where it starts, where it is headed, how, and when.

    Agents that cannot be routed anywhere (``destination is None``) are
    carried through the simulation as never-departed so population counts
    stay conserved.
    """

    id: int
    origin: int
    destination: int | None
    edges: tuple[int, ...]
    departure: int | None

    @property
    def can_depart(self) -> bool:
        return (self.destination is not None and self.departure is not None
                and len(self.edges) > 0)


@dataclass
class AgentPopulation:
    agents: list[AgentPlan]
    scenario: str = "as-planned"

    def __len__(self) -> int:
        return len(self.agents)

    def __iter__(self):
        return iter(self.agents)


def _discretize(volumes: list[tuple[int, float]], target: int
                ) -> list[tuple[int, int]]:
    """Integer agent counts per step: round-half-up, then largest-remainder
    corrections until the counts sum to ``target``."""
    if not volumes or target <= 0:
        return []
    base = [(t, int(math.floor(v + 0.5)), v) for t, v in volumes]
    diff = target - sum(c for _, c, _ in base)
    if diff > 0:
        # most under-rounded first, earliest step on ties
        order = sorted(range(len(base)),
                       key=lambda i: (-(base[i][2] - base[i][1]), base[i][0]))
        for j in range(diff):
            t, c, v = base[order[j % len(base)]]
            base[order[j % len(base)]] = (t, c + 1, v)
    elif diff < 0:
        order = sorted((i for i in range(len(base)) if base[i][1] > 0),
                       key=lambda i: (base[i][2] - base[i][1], -base[i][0]))
        for j in range(-diff):
            t, c, v = base[order[j % len(order)]]
            base[order[j % len(order)]] = (t, c - 1, v)
    return [(t, c) for t, c, _ in base if c > 0]


def plan_to_agents(g: EvacuationGraph, plan: EvacuationPlan,
                   granularity: float = 1.0) -> AgentPopulation:
    """Split a plan's per-step volumes into unit agents.

    ``granularity`` is the number of evacuees one agent stands for; per
    route, agent counts match ``ceil(route volume / granularity)`` so the
    population never under-represents the plan by more than rounding."""
    if granularity <= 0:
        raise ValueError("granularity must be positive")
    agents: list[AgentPlan] = []
    for a in sorted(plan.assignments, key=lambda a: (a.origin, a.edges)):
        if not a.edges:
            continue
        dest = g.edges[a.edges[-1]].head
        scaled = [(t, v / granularity) for t, v in a.departures]
        target = int(math.ceil(sum(v for _, v in scaled) - 1e-9))
        for t, count in _discretize(scaled, target):
            for _ in range(count):
                agents.append(AgentPlan(len(agents), a.origin, dest,
                                        tuple(a.edges), t))
    return AgentPopulation(agents)


def flow_to_agents(g: EvacuationGraph, departures: dict[int, list[tuple[int, float]]],
                   granularity: float = 1.0) -> AgentPopulation:
    """Agents for an aggregate flow that never chose individual routes.

    The flow only pins how many evacuees leave each area per step, so each
    agent is pointed at the safe node it can reach earliest from its origin
    at its departure step — the volume-matched "everyone heads for the
    closest exit" population used to stress free-flow schedules."""
    if granularity <= 0:
        raise ValueError("granularity must be positive")
    agents: list[AgentPlan] = []
    cache: dict[tuple[int, int], tuple[tuple[int, ...], int] | None] = {}
    for origin in sorted(departures):
        vols = [(t, v / granularity) for t, v in sorted(departures[origin])]
        target = int(math.ceil(sum(v for _, v in vols) - 1e-9))
        for t, count in _discretize(vols, target):
            key = (origin, t)
            if key not in cache:
                cache[key] = _earliest_arrival_route(g, origin, t)
            hit = cache[key]
            for _ in range(count):
                if hit is None:
                    agents.append(AgentPlan(len(agents), origin, None, (), None))
                else:
                    route, dest = hit
                    agents.append(AgentPlan(len(agents), origin, dest, route, t))
    return AgentPopulation(agents)


# -- congestion-blind routing -------------------------------------------------


def _earliest_arrival_route(g: EvacuationGraph, origin: int, depart: int,
                            goal: int | None = None
                            ) -> tuple[tuple[int, ...], int] | None:
    """Earliest-arrival route from ``origin`` leaving at ``depart``.

    Plain time-dependent Dijkstra on the empty network: an edge may be
    entered at step t only while its departure gate (deadline, expiry,
    horizon) is still open.  Stops at the first safe node reached, or at
    ``goal`` when one is named.  Returns (edge route, destination)."""
    if origin not in g.nodes:
        return None
    best: dict[int, int] = {origin: depart}
    prev: dict[int, int] = {}
    heap: list[tuple[int, int]] = [(depart, origin)]
    while heap:
        t, u = heapq.heappop(heap)
        if t > best.get(u, g.horizon + 1):
            continue
        if (goal is None and g.kind(u) is NodeKind.SAFE) or u == goal:
            route: list[int] = []
            while u != origin:
                ei = prev[u]
                route.append(ei)
                u = g.edges[ei].tail
            route.reverse()
            return tuple(route), (origin if not route else g.edges[route[-1]].head)
        if g.kind(u) is NodeKind.SAFE:
            continue    # heading for a specific goal; safety is no shortcut
        for ei in g.out_edges[u]:
            e = g.edges[ei]
            if e.capacity <= 0 or t > edge_departure_ub(g, ei):
                continue
            nt = t + e.travel_time
            if nt < best.get(e.head, g.horizon + 1):
                best[e.head] = nt
                prev[e.head] = ei
                heapq.heappush(heap, (nt, e.head))
    return None


def _ranked_safe_nodes(g: EvacuationGraph, origin: int, depart: int
                       ) -> list[int]:
    """Safe nodes reachable from (origin, depart), nearest arrival first."""
    ranked: list[tuple[int, int]] = []
    for s in g.safe_ids():
        hit = _earliest_arrival_route(g, origin, depart, goal=s)
        if hit is not None:
            route, _ = hit
            arrival = depart + sum(g.edges[ei].travel_time for ei in route)
            ranked.append((arrival, s))
    ranked.sort()
    return [s for _, s in ranked]


class _Rerouter:
    """Caches congestion-blind routes so scenario application stays cheap."""

    def __init__(self, g: EvacuationGraph) -> None:
        self.g = g
        self._route: dict[tuple[int, int, int | None],
                          tuple[tuple[int, ...], int] | None] = {}
        self._ranked: dict[tuple[int, int], list[int]] = {}

    def route(self, origin: int, depart: int, goal: int | None
              ) -> tuple[tuple[int, ...], int] | None:
        key = (origin, depart, goal)
        if key not in self._route:
            self._route[key] = _earliest_arrival_route(self.g, origin, depart,
                                                       goal=goal)
        return self._route[key]

    def ranked(self, origin: int, depart: int) -> list[int]:
        key = (origin, depart)
        if key not in self._ranked:
            self._ranked[key] = _ranked_safe_nodes(self.g, origin, depart)
        return self._ranked[key]

    def retarget(self, a: AgentPlan, goal: int | None) -> AgentPlan:
        """Same agent, new destination (None = nearest safe node)."""
        if a.departure is None:
            return a
        hit = self.route(a.origin, a.departure, goal)
        if hit is None:
            return AgentPlan(a.id, a.origin, None, (), None)
        route, dest = hit
        return AgentPlan(a.id, a.origin, dest, route, a.departure)


# -- behavioural scenarios -----------------------------------------------------


def _area_windows(pop: AgentPopulation) -> dict[int, tuple[int, int]]:
    windows: dict[int, tuple[int, int]] = {}
    for a in pop:
        if a.departure is None:
            continue
        lo, hi = windows.get(a.origin, (a.departure, a.departure))
        windows[a.origin] = (min(lo, a.departure), max(hi, a.departure))
    return windows


def _neighbor_areas(g: EvacuationGraph, k: int) -> set[int]:
    near = set()
    for ei in g.out_edges[k]:
        near.add(g.edges[ei].head)
    for ei in g.in_edges[k]:
        near.add(g.edges[ei].tail)
    return {n for n in near if g.kind(n) is NodeKind.EVACUATED}


def _random_departure(g: EvacuationGraph, pop: AgentPopulation,
                      rng: random.Random) -> dict[int, tuple[int, int]]:
    """Per-area draw window: from the earliest departure among neighbouring
    areas (own included) to the area's own latest departure."""
    windows = _area_windows(pop)
    out: dict[int, tuple[int, int]] = {}
    for k, (own_lo, own_hi) in windows.items():
        lo = own_lo
        for n in _neighbor_areas(g, k):
            if n in windows:
                lo = min(lo, windows[n][0])
        out[k] = (min(lo, own_hi), own_hi)
    return out


def _split_three(n: int, rng: random.Random) -> tuple[set[int], set[int]]:
    """Deterministic 50/40/10 split of agent slots; returns the two rerouted
    groups (five-closest, random) by slot index."""
    order = list(range(n))
    rng.shuffle(order)
    n_plan = int(round(0.5 * n))
    n_five = int(round(0.4 * n))
    n_five = min(n_five, n - n_plan)
    five = set(order[n_plan:n_plan + n_five])
    rand = set(order[n_plan + n_five:])
    return five, rand


def apply_scenario(pop: AgentPopulation, scenario: str, seed: int,
                   g: EvacuationGraph) -> AgentPopulation:
    """Perturb a population per one behavioural scenario (fixed seed =
    fixed outcome).  The input population is never mutated."""
    scenario = canonical_scenario(scenario)
    rng = random.Random((seed, scenario).__repr__())
    rr = _Rerouter(g)
    agents = [AgentPlan(a.id, a.origin, a.destination, a.edges, a.departure)
              for a in pop]

    if scenario == "as-planned":
        pass

    elif scenario == "rush":
        first: dict[int, int] = {}
        for a in agents:
            if a.departure is not None:
                first[a.origin] = min(first.get(a.origin, a.departure),
                                      a.departure)
        for a in agents:
            if a.departure is not None:
                a.departure = first[a.origin]

    elif scenario == "random-schedule":
        windows = _random_departure(g, pop, rng)
        for a in agents:
            if a.departure is not None:
                lo, hi = windows[a.origin]
                a.departure = rng.randint(lo, hi)

    elif scenario == "random-plan":
        five, rand = _split_three(len(agents), rng)
        for i, a in enumerate(agents):
            if a.departure is None:
                continue
            if i in five:
                pool = rr.ranked(a.origin, a.departure)[:5]
                goal = rng.choice(pool) if pool else None
                agents[i] = rr.retarget(a, goal) if pool else \
                    AgentPlan(a.id, a.origin, None, (), None)
            elif i in rand:
                goal = rng.choice(g.safe_ids())
                agents[i] = rr.retarget(a, goal)

    elif scenario in ("closest", "closest-volume-matched"):
        for i, a in enumerate(agents):
            agents[i] = rr.retarget(a, None)

    elif scenario == "random-closest":
        five, rand = _split_three(len(agents), rng)
        windows = _random_departure(g, pop, rng)
        for i, a in enumerate(agents):
            if a.departure is None:
                continue
            lo, hi = windows[a.origin]
            a.departure = rng.randint(lo, hi)
            if i in five:
                pool = rr.ranked(a.origin, a.departure)[:5]
                goal = rng.choice(pool) if pool else None
                agents[i] = rr.retarget(a, goal) if pool else \
                    AgentPlan(a.id, a.origin, None, (), None)
            elif i in rand:
                agents[i] = rr.retarget(a, rng.choice(g.safe_ids()))
            else:
                agents[i] = rr.retarget(a, None)

    return AgentPopulation(agents, scenario)


# -- stepping engine ------------------------------------------------------------


@dataclass
class SimResult:
    """Outcome of one replay: who made it, when, and how the network loaded."""

    scenario: str
    total: int
    arrived: int
    outcomes: list[int | None]          # per agent: arrival step, or None
    profile: list[int]                  # cumulative arrivals, index = step
    departures: list[int]               # actual first-edge entries per step
    in_transit: list[int]               # on-network agents after each step
    horizon: int

    @property
    def percent(self) -> float:
        return 100.0 * self.arrived / self.total if self.total else 100.0

    def to_csv(self) -> str:
        lines = ["step,cumulative_arrivals,departures,in_transit"]
        for t in range(self.horizon + 1):
            lines.append(f"{t},{self.profile[t]},{self.departures[t]},"
                         f"{self.in_transit[t]}")
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        return {"scenario": self.scenario, "total": self.total,
                "arrived": self.arrived, "percent": round(self.percent, 2),
                "horizon": self.horizon}


def simulate(pop: AgentPopulation, g: EvacuationGraph,
             horizon: int | None = None, seed: int = 0) -> SimResult:
    """Replay a population through the queue network.

    ``seed`` is accepted for interface symmetry but unused: every source of
    randomness lives in ``apply_scenario`` and the engine itself is
    deterministic."""
    del seed
    H = g.horizon if horizon is None else int(horizon)
    E = len(g.edges)
    storage = [max(int(math.floor(e.capacity * e.travel_time + 1e-9)), 1)
               for e in g.edges]
    gate = [edge_departure_ub(g, ei) for ei in range(E)]
    queues: list[deque[tuple[int, int]]] = [deque() for _ in range(E)]
    credit = [0.0] * E
    # in-transit occupancy per edge; entries ripen out of it over time
    transit = [0] * E
    ripen: list[dict[int, int]] = [{} for _ in range(E)]

    def admit(ej: int, t: int, aid: int) -> bool:
        if transit[ej] >= storage[ej]:
            return False
        tau = g.edges[ej].travel_time
        queues[ej].append((t + tau, aid))
        if tau > 0:
            transit[ej] += 1
            ripen[ej][t + tau] = ripen[ej].get(t + tau, 0) + 1
        return True

    # hop[i] = index into the agent's route of the edge it sits on
    hop = [0] * len(pop.agents)
    arrival: list[int | None] = [None] * len(pop.agents)
    stuck = [False] * len(pop.agents)
    pending = deque(a.id for a in pop.agents if a.can_depart)
    for a in pop.agents:
        if not a.can_depart:
            stuck[a.id] = True

    profile = [0] * (H + 1)
    departures = [0] * (H + 1)
    in_transit = [0] * (H + 1)
    on_network = 0
    n_arrived = 0

    for t in range(H + 1):
        # 0. traversals finishing now leave the in-transit compartment
        for ei in range(E):
            done = ripen[ei].pop(t, 0)
            if done:
                transit[ei] -= done

        # 1. transfers, FIFO per edge, rotated edge order for merge fairness
        start = t % E if E else 0
        for off in range(E):
            ei = (start + off) % E
            q = queues[ei]
            credit[ei] = min(credit[ei] + g.edges[ei].capacity,
                             max(g.edges[ei].capacity, 1.0))
            while q and credit[ei] >= 1.0 - 1e-9:
                ready, aid = q[0]
                if ready > t:
                    break
                a = pop.agents[aid]
                nxt = hop[aid] + 1
                if nxt >= len(a.edges):
                    q.popleft()
                    credit[ei] -= 1.0
                    arrival[aid] = t
                    n_arrived += 1
                    on_network -= 1
                    profile[t] += 1
                    continue
                ej = a.edges[nxt]
                if t > gate[ej]:
                    break       # road ahead closed for good; queue is stuck
                if not admit(ej, t, aid):
                    break       # head-of-line blocking on a packed road
                q.popleft()
                credit[ei] -= 1.0
                hop[aid] = nxt

        # 2. origin entries for agents whose departure step has come
        still_waiting: deque[int] = deque()
        while pending:
            aid = pending.popleft()
            a = pop.agents[aid]
            if a.departure > t:
                still_waiting.append(aid)
                continue
            e0 = a.edges[0]
            if t > gate[e0]:
                stuck[aid] = True          # missed the window for good
                continue
            if not admit(e0, t, aid):
                still_waiting.append(aid)  # packed road: retry next step
                continue
            hop[aid] = 0
            departures[t] += 1
            on_network += 1
        pending = still_waiting

        if t > 0:
            profile[t] += profile[t - 1]
        in_transit[t] = on_network

    return SimResult(scenario=pop.scenario, total=len(pop.agents),
                     arrived=n_arrived, outcomes=arrival, profile=profile,
                     departures=departures, in_transit=in_transit, horizon=H)


# -- scenario sweeps -------------------------------------------------------------


def run_scenarios(g: EvacuationGraph, pop: AgentPopulation,
                  scenarios=SCENARIOS, seed: int = 0,
                  horizon: int | None = None) -> dict[str, SimResult]:
    out: dict[str, SimResult] = {}
    for name in scenarios:
        name = canonical_scenario(name)
        out[name] = simulate(apply_scenario(pop, name, seed, g), g,
                             horizon=horizon)
    return out


def sweep_to_json(results: dict[str, SimResult]) -> str:
    return json.dumps({name: r.summary() for name, r in sorted(results.items())},
                      indent=2) + "\n"
