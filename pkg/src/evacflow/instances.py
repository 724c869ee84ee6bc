"""Reading, writing, shrinking, scaling and generating evacuation instances.

The native text format is line oriented and versioned::

    evacgraph/1
    meta name=coastal step_seconds=300 horizon=216
    node 0 evacuated demand=1200.0 deadline=96
    node 7 transit
    node 9 safe
    edge 0 7 travel=2 capacity=30.0 expiry=120
    edge 7 9 travel=1 capacity=45.0 expiry=inf

Node ids are integers.  Saving always emits the canonical ordering (nodes by
id, edges by (tail, head, travel, capacity, expiry)), so save(load(x)) is
byte-identical once x is canonical.  A JSON rendering of the same data is
accepted and produced for interchange with other tooling.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO

from .graph import Edge, EvacuationGraph, Node, NodeKind

FORMAT_TAG = "evacgraph/1"


class InstanceFormatError(ValueError):
    """Raised with a line/field diagnostic when parsing fails."""


# -- text format -------------------------------------------------------------

def _fmt_num(x: float) -> str:
    return repr(float(x))


def dumps(g: EvacuationGraph) -> str:
    lines = [FORMAT_TAG]
    lines.append(f"meta name={g.name or 'unnamed'} "
                 f"step_seconds={g.step_seconds} horizon={g.horizon}")
    for n in g.node_ids():
        nd = g.nodes[n]
        if nd.kind is NodeKind.EVACUATED:
            lines.append(f"node {n} evacuated demand={_fmt_num(nd.demand)} "
                         f"deadline={nd.deadline}")
        else:
            lines.append(f"node {n} {nd.kind.value}")
    edge_order = sorted(
        range(len(g.edges)),
        key=lambda ei: (g.edges[ei].tail, g.edges[ei].head, g.edges[ei].travel_time,
                        g.edges[ei].capacity, math.inf if g.edges[ei].expiry is None
                        else g.edges[ei].expiry))
    for ei in edge_order:
        e = g.edges[ei]
        exp = "inf" if e.expiry is None else str(e.expiry)
        lines.append(f"edge {e.tail} {e.head} travel={e.travel_time} "
                     f"capacity={_fmt_num(e.capacity)} expiry={exp}")
    return "\n".join(lines) + "\n"


def _kv(tokens: list[str], lineno: int) -> dict[str, str]:
    out = {}
    for tok in tokens:
        if "=" not in tok:
            raise InstanceFormatError(f"line {lineno}: expected key=value, got {tok!r}")
        k, v = tok.split("=", 1)
        out[k] = v
    return out


def loads(text: str, name: str | None = None) -> EvacuationGraph:
    lines = text.splitlines()
    if not lines or lines[0].strip() != FORMAT_TAG:
        raise InstanceFormatError(f"line 1: missing format tag {FORMAT_TAG!r}")
    meta: dict[str, str] = {}
    nodes: list[Node] = []
    edges: list[Edge] = []
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        rec = tokens[0]
        try:
            if rec == "meta":
                meta.update(_kv(tokens[1:], lineno))
            elif rec == "node":
                nid = int(tokens[1])
                kind = tokens[2]
                if kind == "evacuated":
                    kv = _kv(tokens[3:], lineno)
                    nodes.append(Node(nid, NodeKind.EVACUATED,
                                      demand=float(kv["demand"]),
                                      deadline=int(kv["deadline"])))
                elif kind in ("transit", "safe"):
                    nodes.append(Node(nid, NodeKind(kind)))
                else:
                    raise InstanceFormatError(
                        f"line {lineno}: unknown node kind {kind!r}")
            elif rec == "edge":
                tail, head = int(tokens[1]), int(tokens[2])
                kv = _kv(tokens[3:], lineno)
                expiry = None if kv.get("expiry", "inf") == "inf" else int(kv["expiry"])
                edges.append(Edge(tail, head, travel_time=int(kv["travel"]),
                                  capacity=float(kv["capacity"]), expiry=expiry))
            else:
                raise InstanceFormatError(f"line {lineno}: unknown record {rec!r}")
        except InstanceFormatError:
            raise
        except (KeyError, ValueError, IndexError) as exc:
            raise InstanceFormatError(f"line {lineno}: {exc}") from exc
    try:
        horizon = int(meta["horizon"])
        step_seconds = int(meta.get("step_seconds", "300"))
    except KeyError as exc:
        raise InstanceFormatError(f"meta line missing field {exc}") from exc
    try:
        return EvacuationGraph(nodes, edges, horizon=horizon,
                               step_seconds=step_seconds,
                               name=name or meta.get("name", ""))
    except ValueError as exc:
        raise InstanceFormatError(str(exc)) from exc


# -- JSON format ---------------------------------------------------------------

def to_json_dict(g: EvacuationGraph) -> dict:
    nodes = []
    for n in g.node_ids():
        nd = g.nodes[n]
        rec: dict = {"id": n, "kind": nd.kind.value}
        if nd.kind is NodeKind.EVACUATED:
            rec["demand"] = nd.demand
            rec["deadline"] = nd.deadline
        nodes.append(rec)
    edges = [{"tail": e.tail, "head": e.head, "travel": e.travel_time,
              "capacity": e.capacity, "expiry": e.expiry} for e in g.edges]
    return {"format": FORMAT_TAG, "name": g.name, "step_seconds": g.step_seconds,
            "horizon": g.horizon, "nodes": nodes, "edges": edges}


def from_json_dict(data: dict, name: str | None = None) -> EvacuationGraph:
    if data.get("format") != FORMAT_TAG:
        raise InstanceFormatError(f"missing/unknown format field, want {FORMAT_TAG!r}")
    nodes = []
    for rec in data["nodes"]:
        kind = NodeKind(rec["kind"])
        if kind is NodeKind.EVACUATED:
            nodes.append(Node(rec["id"], kind, demand=float(rec["demand"]),
                              deadline=int(rec["deadline"])))
        else:
            nodes.append(Node(rec["id"], kind))
    edges = [Edge(e["tail"], e["head"], travel_time=int(e["travel"]),
                  capacity=float(e["capacity"]),
                  expiry=None if e.get("expiry") is None else int(e["expiry"]))
             for e in data["edges"]]
    return EvacuationGraph(nodes, edges, horizon=int(data["horizon"]),
                           step_seconds=int(data.get("step_seconds", 300)),
                           name=name or data.get("name", ""))


def load(path: str | Path) -> EvacuationGraph:
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json" or text.lstrip().startswith("{"):
        return from_json_dict(json.loads(text), name=path.stem)
    return loads(text, name=None)


def save(g: EvacuationGraph, path: str | Path) -> None:
    path = Path(path)
    if path.suffix == ".json":
        path.write_text(json.dumps(to_json_dict(g), indent=1) + "\n")
    else:
        path.write_text(dumps(g))


# -- transformations -----------------------------------------------------------

def _shortest_travel_path(g: EvacuationGraph, origin: int, *,
                          respect_expiry: bool = False) -> list[int] | None:
    """Min travel-time edge sequence from origin to its closest safe node.

    Deterministic: heap ties resolve by (distance, node id) and the first
    strict improvement fixes the predecessor.  With ``respect_expiry`` an edge
    is relaxed only if the traversal completes by its expiry when entered at
    the earliest-arrival time.
    """
    import heapq

    dist = {origin: 0}
    pred: dict[int, tuple[int, int]] = {}
    heap: list[tuple[int, int]] = [(0, origin)]
    seen = set()
    best_safe = None
    while heap:
        d, node = heapq.heappop(heap)
        if node in seen:
            continue
        seen.add(node)
        if g.nodes[node].kind is NodeKind.SAFE:
            best_safe = node
            break
        for ei in g.out_edges[node]:
            e = g.edges[ei]
            nd = d + e.travel_time
            if respect_expiry and e.expiry is not None and nd > e.expiry:
                continue
            if e.head not in dist or nd < dist[e.head]:
                dist[e.head] = nd
                pred[e.head] = (node, ei)
                heapq.heappush(heap, (nd, e.head))
    if best_safe is None:
        return None
    path = []
    node = best_safe
    while node != origin:
        prev, ei = pred[node]
        path.append(ei)
        node = prev
    return path[::-1]


def reduce_rn(g: EvacuationGraph, n: int, *, respect_expiry: bool = False) -> EvacuationGraph:
    """Keep the n earliest-deadline evacuated nodes and their rescue corridors.

    Corridors are static shortest travel-time paths to each kept node's
    closest safe node (expiry-ignoring by default).  Evacuated nodes that are
    dropped but sit on a kept corridor stay in the graph with demand zero so
    their deadline still blocks late pass-through.
    """
    evac = sorted(g.evacuated_ids(),
                  key=lambda i: (g.nodes[i].deadline
                                 if g.nodes[i].deadline is not None else g.horizon, i))
    kept = evac[:n]
    kept_set = set(kept)
    node_ids: set[int] = set(kept)
    edge_ids: set[int] = set()
    for k in kept:
        path = _shortest_travel_path(g, k, respect_expiry=respect_expiry)
        if path is None:
            continue
        for ei in path:
            edge_ids.add(ei)
            node_ids.add(g.edges[ei].tail)
            node_ids.add(g.edges[ei].head)
    nodes = []
    for nid in sorted(node_ids):
        nd = g.nodes[nid]
        if nd.kind is NodeKind.EVACUATED and nid not in kept_set:
            nodes.append(Node(nid, NodeKind.EVACUATED, demand=0.0, deadline=nd.deadline))
        else:
            nodes.append(nd)
    edges = [g.edges[ei] for ei in sorted(edge_ids)]
    return EvacuationGraph(nodes, edges, horizon=g.horizon,
                           step_seconds=g.step_seconds,
                           name=f"{g.name or 'instance'}-r{n:02d}")


def scale_ix(g: EvacuationGraph, x: float) -> EvacuationGraph:
    """Multiply every demand by x; everything else untouched."""
    if x < 0:
        raise ValueError("demand scale factor must be non-negative")
    nodes = []
    for nid in g.node_ids():
        nd = g.nodes[nid]
        if nd.kind is NodeKind.EVACUATED:
            nodes.append(Node(nid, NodeKind.EVACUATED, demand=nd.demand * x,
                              deadline=nd.deadline))
        else:
            nodes.append(nd)
    return EvacuationGraph(nodes, list(g.edges), horizon=g.horizon,
                           step_seconds=g.step_seconds,
                           name=f"{g.name or 'instance'}-i{x:g}")


# -- synthetic generation --------------------------------------------------------

@dataclass
class GenParams:
    """Knobs for the synthetic generator; presets fill these in."""

    n_evacuated: int = 6
    n_transit: int = 12
    n_safe: int = 2
    n_edges: int = 36
    horizon: int = 48
    step_seconds: int = 300
    demand_range: tuple[int, int] = (20, 120)
    capacity_range: tuple[int, int] = (4, 14)
    travel_range: tuple[int, int] = (1, 4)
    deadline_frac: tuple[float, float] = (0.35, 0.9)   # of horizon
    expiry_prob: float = 0.3
    seed: int = 0
    name: str = "synthetic"


PRESETS: dict[str, GenParams] = {
    # Mirrors the shape of a mid-size coastal road network study area:
    # 50 evacuated areas, 125 intersections, 10 shelters, 458 one-way edges,
    # 18 h horizon at 5-minute steps.
    "hn-shaped": GenParams(
        n_evacuated=50, n_transit=125, n_safe=10, n_edges=458,
        horizon=216, step_seconds=300,
        demand_range=(600, 2200), capacity_range=(15, 60), travel_range=(1, 6),
        deadline_frac=(0.3, 0.85), expiry_prob=0.25, seed=7, name="hn-shaped"),
    # Two disjoint two-hop routes from one area to one shelter with bottleneck
    # capacities 2 and 3; the workhorse fixture for solver unit tests.
    "toy-diamond": GenParams(name="toy-diamond"),
    # Five areas sharing a fast two-hop corridor to the nearest shelter that
    # only trickles (capacity_range caps the corridor), each with a
    # demand-sized slower detour to a far shelter.  Plans take the detours;
    # anyone chasing the nearest exit funnels into the corridor and queues.
    # The congested family for behavioural-scenario studies.
    "bottleneck": GenParams(
        n_evacuated=5, n_transit=6, n_safe=2, n_edges=16,
        horizon=48, step_seconds=300,
        demand_range=(40, 80), capacity_range=(3, 3), travel_range=(2, 3),
        deadline_frac=(0.6, 0.7), expiry_prob=0.0, seed=0, name="bottleneck"),
}


def _toy_diamond() -> EvacuationGraph:
    nodes = [
        Node(0, NodeKind.EVACUATED, demand=20.0, deadline=8),
        Node(1, NodeKind.TRANSIT),
        Node(2, NodeKind.TRANSIT),
        Node(3, NodeKind.SAFE),
    ]
    edges = [
        Edge(0, 1, travel_time=1, capacity=2.0),
        Edge(0, 2, travel_time=1, capacity=3.0),
        Edge(1, 3, travel_time=1, capacity=2.0),
        Edge(2, 3, travel_time=1, capacity=3.0),
    ]
    return EvacuationGraph(nodes, edges, horizon=10, step_seconds=300,
                           name="toy-diamond")


def _bottleneck(p: GenParams) -> EvacuationGraph:
    """Shared fast-but-narrow corridor beside per-area wide detours.

    The nearest shelter is two quick hops away through a corridor that
    passes only a trickle per step; the far shelter sits behind a longer
    detour sized to each area's demand.  Sensible plans go around; nearest-
    exit behaviour jams."""
    rng = random.Random(p.seed)
    n = p.n_evacuated
    hub, s_near, s_far = n, 2 * n + 1, 2 * n + 2
    narrow = float(rng.randint(*p.capacity_range))
    nodes = [Node(hub, NodeKind.TRANSIT),
             Node(s_near, NodeKind.SAFE), Node(s_far, NodeKind.SAFE)]
    edges = [Edge(hub, s_near, travel_time=1, capacity=narrow)]
    for k in range(n):
        demand = float(rng.randint(*p.demand_range))
        wide = float(math.ceil(demand / 8.0) + rng.randint(0, 2))
        deadline = rng.randint(int(p.deadline_frac[0] * p.horizon),
                               int(p.deadline_frac[1] * p.horizon))
        nodes.append(Node(k, NodeKind.EVACUATED, demand=demand,
                          deadline=deadline))
        detour = n + 1 + k
        nodes.append(Node(detour, NodeKind.TRANSIT))
        edges.append(Edge(k, hub, travel_time=1, capacity=wide))
        edges.append(Edge(k, detour, travel_time=rng.randint(*p.travel_range),
                          capacity=wide))
        edges.append(Edge(detour, s_far,
                          travel_time=rng.randint(*p.travel_range),
                          capacity=wide))
    nodes.sort(key=lambda nd: nd.id)
    return EvacuationGraph(nodes, edges, horizon=p.horizon,
                           step_seconds=p.step_seconds,
                           name=f"{p.name}-s{p.seed}")


def generate_synthetic(params: GenParams | str) -> EvacuationGraph:
    """Deterministic-per-seed random instance where every evacuated area can
    reach at least one shelter before any expiry or deadline interferes."""
    if isinstance(params, str):
        try:
            params = PRESETS[params]
        except KeyError:
            raise ValueError(f"unknown preset {params!r}; "
                             f"known: {sorted(PRESETS)}") from None
    if params.name == "toy-diamond":
        return _toy_diamond()
    if params.name == "bottleneck":
        return _bottleneck(params)

    rng = random.Random(params.seed)
    p = params
    evac_ids = list(range(p.n_evacuated))
    transit_ids = list(range(p.n_evacuated, p.n_evacuated + p.n_transit))
    safe_ids = list(range(p.n_evacuated + p.n_transit,
                          p.n_evacuated + p.n_transit + p.n_safe))

    edges: list[Edge] = []
    edge_keys: set[tuple[int, int]] = set()
    arrival_need: dict[int, int] = {}   # evac id -> travel time of its seeded corridor

    def add_edge(tail: int, head: int, travel: int, cap: float,
                 expiry: int | None) -> bool:
        if tail == head or (tail, head) in edge_keys:
            return False
        edge_keys.add((tail, head))
        edges.append(Edge(tail, head, travel_time=travel, capacity=cap, expiry=expiry))
        return True

    # Seed one corridor per evacuated area: evac -> 1..3 transit hops -> shelter.
    for k in evac_ids:
        hops = rng.randint(min(1, len(transit_ids)), min(3, len(transit_ids)))
        chain = rng.sample(transit_ids, hops)
        shelter = rng.choice(safe_ids)
        route = [k] + chain + [shelter]
        total = 0
        for a, b in zip(route, route[1:]):
            tr = rng.randint(*p.travel_range)
            total += tr
            add_edge(a, b, tr, float(rng.randint(*p.capacity_range)), None)
        arrival_need[k] = total

    # Random extra edges between non-safe tails and any heads (not into sources
    # of other corridors' demand semantics: heads may be any node kind; tails
    # exclude shelters, which have no reason to feed traffic back out).
    pool_tails = evac_ids + transit_ids
    pool_heads = evac_ids + transit_ids + safe_ids
    guard = 0
    while len(edges) < p.n_edges and guard < 50 * p.n_edges:
        guard += 1
        tail = rng.choice(pool_tails)
        head = rng.choice(pool_heads)
        tr = rng.randint(*p.travel_range)
        expiry = None
        if rng.random() < p.expiry_prob:
            expiry = rng.randint(max(tr + 2, p.horizon // 6), p.horizon)
        add_edge(tail, head, tr, float(rng.randint(*p.capacity_range)), expiry)

    nodes = []
    for k in evac_ids:
        lo = arrival_need.get(k, 2) + 2
        dmin = min(max(int(p.deadline_frac[0] * p.horizon), lo), p.horizon)
        dmax = min(max(int(p.deadline_frac[1] * p.horizon), dmin + 1), p.horizon)
        deadline = rng.randint(dmin, dmax)
        demand = float(rng.randint(*p.demand_range))
        nodes.append(Node(k, NodeKind.EVACUATED, demand=demand, deadline=deadline))
    nodes += [Node(t, NodeKind.TRANSIT) for t in transit_ids]
    nodes += [Node(s, NodeKind.SAFE) for s in safe_ids]

    g = EvacuationGraph(nodes, edges, horizon=p.horizon,
                        step_seconds=p.step_seconds,
                        name=f"{p.name}-s{p.seed}")
    return g
