"""Static evacuation networks and their time-expanded counterparts.

The static side is a directed graph whose nodes are evacuated areas (carrying a
demand and a last feasible departure step), transit intersections, or safe
shelters.  Edges carry an integer travel time in steps, a per-step capacity,
and an optional expiry step after which the edge can no longer be used.

The dynamic side replicates every node once per time step and connects the
copies with movement arcs, waiting arcs (only at evacuated and safe nodes), a
super source feeding each evacuated area's demand and a super sink draining
every safe copy.  All solvers in this package run on that expanded graph or on
path abstractions derived from it.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Sequence


class NodeKind(Enum):
    EVACUATED = "evacuated"
    TRANSIT = "transit"
    SAFE = "safe"


@dataclass(frozen=True)
class Node:
    id: int
    kind: NodeKind
    demand: float = 0.0        # evacuees initially located here (evacuated nodes)
    deadline: int | None = None  # last step a departure may leave this node

    def __post_init__(self) -> None:
        if self.kind is NodeKind.EVACUATED:
            if self.demand < 0:
                raise ValueError(f"node {self.id}: negative demand {self.demand}")
            if self.deadline is None:
                raise ValueError(f"node {self.id}: evacuated node needs a deadline")
        else:
            if self.demand:
                raise ValueError(f"node {self.id}: only evacuated nodes carry demand")
            if self.deadline is not None:
                raise ValueError(f"node {self.id}: only evacuated nodes have deadlines")


@dataclass(frozen=True)
class Edge:
    tail: int
    head: int
    travel_time: int       # whole time steps, >= 0
    capacity: float        # evacuees per step, >= 0
    expiry: int | None = None  # step by which a traversal must complete; None = never

    def __post_init__(self) -> None:
        if self.travel_time < 0 or int(self.travel_time) != self.travel_time:
            raise ValueError(f"edge {self.tail}->{self.head}: bad travel time")
        if self.capacity < 0:
            raise ValueError(f"edge {self.tail}->{self.head}: negative capacity")


class EvacuationGraph:
    """Immutable static network with precomputed adjacency.

    Node ids are arbitrary ints; edge ids are indices into ``edges`` and are
    the canonical handle used by paths, plans and file formats.
    """

    def __init__(self, nodes: Iterable[Node], edges: Iterable[Edge],
                 horizon: int, step_seconds: int = 300, name: str = "") -> None:
        self.nodes: dict[int, Node] = {}
        for nd in nodes:
            if nd.id in self.nodes:
                raise ValueError(f"duplicate node id {nd.id}")
            self.nodes[nd.id] = nd
        self.edges: tuple[Edge, ...] = tuple(edges)
        for ei, e in enumerate(self.edges):
            for endpoint in (e.tail, e.head):
                if endpoint not in self.nodes:
                    raise ValueError(f"edge {ei} references undeclared node {endpoint}")
        if horizon < 0:
            raise ValueError(f"horizon must be non-negative, got {horizon}")
        if step_seconds <= 0:
            raise ValueError(f"step_seconds must be positive, got {step_seconds}")
        self.horizon = int(horizon)
        self.step_seconds = int(step_seconds)
        self.name = name

        self.out_edges: dict[int, tuple[int, ...]] = {n: () for n in self.nodes}
        self.in_edges: dict[int, tuple[int, ...]] = {n: () for n in self.nodes}
        out: dict[int, list[int]] = {n: [] for n in self.nodes}
        inc: dict[int, list[int]] = {n: [] for n in self.nodes}
        for ei, e in enumerate(self.edges):
            out[e.tail].append(ei)
            inc[e.head].append(ei)
        for n in self.nodes:
            self.out_edges[n] = tuple(out[n])
            self.in_edges[n] = tuple(inc[n])

    # -- convenience views -------------------------------------------------

    def node_ids(self) -> list[int]:
        return sorted(self.nodes)

    def evacuated_ids(self) -> list[int]:
        return sorted(n for n, nd in self.nodes.items() if nd.kind is NodeKind.EVACUATED)

    def transit_ids(self) -> list[int]:
        return sorted(n for n, nd in self.nodes.items() if nd.kind is NodeKind.TRANSIT)

    def safe_ids(self) -> list[int]:
        return sorted(n for n, nd in self.nodes.items() if nd.kind is NodeKind.SAFE)

    def total_demand(self) -> float:
        return sum(nd.demand for nd in self.nodes.values() if nd.kind is NodeKind.EVACUATED)

    def kind(self, node_id: int) -> NodeKind:
        return self.nodes[node_id].kind

    def __repr__(self) -> str:  # pragma: no cover - debugging nicety
        return (f"EvacuationGraph({self.name or 'unnamed'}: "
                f"{len(self.nodes)} nodes, {len(self.edges)} edges, H={self.horizon})")


def edge_departure_ub(g: EvacuationGraph, edge_id: int, *,
                      lenient_expiry: bool = False) -> int:
    """Last step at which a traversal of ``edge_id`` may start, or -1 if never.

    Under the default semantics an expiring edge must be fully traversed by
    its expiry step (departure t needs t + travel <= expiry).  The lenient
    variant only constrains the departure step itself (t <= expiry).  A
    deadline on an evacuated tail node caps departures from that node in
    either mode, and arrivals must always fit inside the horizon.
    """
    e = g.edges[edge_id]
    ub = g.horizon - e.travel_time
    if e.expiry is not None:
        ub = min(ub, e.expiry if lenient_expiry else e.expiry - e.travel_time)
    tail = g.nodes[e.tail]
    if tail.kind is NodeKind.EVACUATED and tail.deadline is not None:
        ub = min(ub, tail.deadline)
    return max(ub, -1)


# -- time expansion ---------------------------------------------------------

ARC_MOVE = 0
ARC_WAIT = 1
ARC_SOURCE = 2
ARC_SINK = 3
ARC_OVERFLOW = 4


@dataclass
class TimeExpandedGraph:
    """Arc-list view of the time expansion of a static network.

    Time-node index for (node, t) is ``position(node) * (horizon + 1) + t``;
    the super source and super sink occupy the last two indices.  Arcs not on
    any source->sink path have been pruned; ``dep_ub`` keeps the pre-pruning
    per-edge departure bound so path windows can be recomputed cheaply.
    """

    g: EvacuationGraph
    node_order: list[int]                 # sorted static ids; defines positions
    source: int
    sink: int
    arc_tail: list[int]
    arc_head: list[int]
    arc_cap: list[float]                  # math.inf for uncapacitated arcs
    arc_kind: list[int]
    arc_edge: list[int]                   # static edge id for movement arcs, else -1
    arc_time: list[int]                   # departure step for movement arcs, else -1
    dep_ub: list[int]                     # per static edge, -1 when never usable
    unsatisfiable: list[int]              # evacuated ids whose demand cannot reach safety
    lenient_expiry: bool
    has_overflow: bool
    kept_time_nodes: int

    _pos: dict[int, int] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        self._pos = {n: i for i, n in enumerate(self.node_order)}

    @property
    def horizon(self) -> int:
        return self.g.horizon

    @property
    def n_nodes(self) -> int:
        return len(self.node_order) * (self.horizon + 1) + 2

    @property
    def n_arcs(self) -> int:
        return len(self.arc_tail)

    def time_node(self, node_id: int, t: int) -> int:
        return self._pos[node_id] * (self.horizon + 1) + t

    def split(self, tn: int) -> tuple[int, int]:
        """Inverse of time_node for ordinary time nodes."""
        pos, t = divmod(tn, self.horizon + 1)
        return self.node_order[pos], t

    def movement_arc_exists(self, edge_id: int, t: int) -> bool:
        return 0 <= t <= self.dep_ub[edge_id]


def _reachable(n_nodes: int, adj: list[list[tuple[int, int]]], start: int) -> list[bool]:
    seen = [False] * n_nodes
    seen[start] = True
    q = deque([start])
    while q:
        u = q.popleft()
        for v, _arc in adj[u]:
            if not seen[v]:
                seen[v] = True
                q.append(v)
    return seen


def build_time_expanded_graph(g: EvacuationGraph, *, lenient_expiry: bool = False,
                              with_overflow: bool = False) -> TimeExpandedGraph:
    """Expand ``g`` over steps 0..horizon and prune off-path arcs.

    Demand that cannot reach any safe node before relevant expiries/deadlines
    is reported in ``unsatisfiable`` rather than failing construction.  With
    ``with_overflow`` an infinite-capacity arc from the last copy of each
    evacuated node to the sink is added (used by models that must route all
    demand and price the unserved remainder).
    """
    H = g.horizon
    order = g.node_ids()
    pos = {n: i for i, n in enumerate(order)}
    n_tn = len(order) * (H + 1)
    source = n_tn
    sink = n_tn + 1

    dep_ub = [edge_departure_ub(g, ei, lenient_expiry=lenient_expiry)
              for ei in range(len(g.edges))]

    tails: list[int] = []
    heads: list[int] = []
    caps: list[float] = []
    kinds: list[int] = []
    eids: list[int] = []
    times: list[int] = []

    def add(u: int, v: int, cap: float, kind: int, eid: int = -1, t: int = -1) -> None:
        tails.append(u)
        heads.append(v)
        caps.append(cap)
        kinds.append(kind)
        eids.append(eid)
        times.append(t)

    for ei, e in enumerate(g.edges):
        base_t = pos[e.tail] * (H + 1)
        base_h = pos[e.head] * (H + 1)
        for t in range(dep_ub[ei] + 1):
            add(base_t + t, base_h + t + e.travel_time, e.capacity, ARC_MOVE, ei, t)

    for n in order:
        kind = g.nodes[n].kind
        if kind is NodeKind.TRANSIT:
            continue
        base = pos[n] * (H + 1)
        for t in range(H):
            add(base + t, base + t + 1, math.inf, ARC_WAIT)

    for n in g.evacuated_ids():
        if g.nodes[n].demand > 0:
            add(source, pos[n] * (H + 1), g.nodes[n].demand, ARC_SOURCE)

    for n in g.safe_ids():
        base = pos[n] * (H + 1)
        for t in range(H + 1):
            add(base + t, sink, math.inf, ARC_SINK)

    if with_overflow:
        for n in g.evacuated_ids():
            if g.nodes[n].demand > 0:
                add(pos[n] * (H + 1) + H, sink, math.inf, ARC_OVERFLOW)

    n_nodes = n_tn + 2
    fwd_adj: list[list[tuple[int, int]]] = [[] for _ in range(n_nodes)]
    bwd_adj: list[list[tuple[int, int]]] = [[] for _ in range(n_nodes)]
    for ai in range(len(tails)):
        fwd_adj[tails[ai]].append((heads[ai], ai))
        bwd_adj[heads[ai]].append((tails[ai], ai))
    fwd = _reachable(n_nodes, fwd_adj, source)
    bwd = _reachable(n_nodes, bwd_adj, sink)

    keep = [fwd[tails[ai]] and bwd[heads[ai]] for ai in range(len(tails))]

    unsat = []
    for n in g.evacuated_ids():
        if g.nodes[n].demand > 0:
            tn0 = pos[n] * (H + 1)
            if not (fwd[tn0] and bwd[tn0]):
                unsat.append(n)

    kept_nodes = {source, sink}
    f_tails, f_heads, f_caps, f_kinds, f_eids, f_times = [], [], [], [], [], []
    for ai, k in enumerate(keep):
        if not k:
            continue
        f_tails.append(tails[ai])
        f_heads.append(heads[ai])
        f_caps.append(caps[ai])
        f_kinds.append(kinds[ai])
        f_eids.append(eids[ai])
        f_times.append(times[ai])
        kept_nodes.add(tails[ai])
        kept_nodes.add(heads[ai])

    return TimeExpandedGraph(
        g=g, node_order=order, source=source, sink=sink,
        arc_tail=f_tails, arc_head=f_heads, arc_cap=f_caps,
        arc_kind=f_kinds, arc_edge=f_eids, arc_time=f_times,
        dep_ub=dep_ub, unsatisfiable=unsat,
        lenient_expiry=lenient_expiry, has_overflow=with_overflow,
        kept_time_nodes=len(kept_nodes) - 2,
    )


# -- paths ------------------------------------------------------------------

@dataclass(frozen=True)
class EvacPath:
    """A simple origin-to-shelter route plus its temporal envelope.

    ``offsets[i]`` is the cumulative travel time from the origin to the tail
    of ``edges[i]``; a departure at step t therefore enters ``edges[i]`` at
    t + offsets[i].  ``window`` is the contiguous range of departure steps for
    which every edge on the route is still usable, and ``capacity`` is the
    bottleneck per-step edge capacity along the route.
    """

    origin: int
    edges: tuple[int, ...]
    offsets: tuple[int, ...]
    window: range
    capacity: float

    @property
    def destination_hint(self) -> int | None:
        return None  # resolved via the graph; kept out of the frozen hash

    def destination(self, g: EvacuationGraph) -> int:
        return g.edges[self.edges[-1]].head

    def key(self) -> tuple[int, tuple[int, ...]]:
        return (self.origin, self.edges)


def path_window(g: EvacuationGraph, origin: int, edge_ids: Sequence[int], *,
                lenient_expiry: bool = False) -> tuple[range, float, tuple[int, ...]]:
    """Departure window, bottleneck capacity and offsets for a candidate route.

    The window is the set of departure steps t such that every edge on the
    route can still be entered at t + offset and the origin's deadline is
    respected; it is always a (possibly empty) prefix range starting at 0.
    """
    if not edge_ids:
        raise ValueError("a path needs at least one edge")
    node = origin
    offsets = []
    off = 0
    ub = math.inf
    cap = math.inf
    for ei in edge_ids:
        e = g.edges[ei]
        if e.tail != node:
            raise ValueError(f"edge {ei} does not continue the path at node {node}")
        offsets.append(off)
        ub = min(ub, edge_departure_ub(g, ei, lenient_expiry=lenient_expiry) - off)
        cap = min(cap, e.capacity)
        off += e.travel_time
        node = e.head
    nd = g.nodes[origin]
    if nd.kind is not NodeKind.EVACUATED:
        raise ValueError(f"path origin {origin} is not an evacuated node")
    if nd.deadline is not None:
        ub = min(ub, nd.deadline)
    last = int(ub) if ub is not math.inf else g.horizon
    return range(0, max(last + 1, 0)), cap, tuple(offsets)


def make_path(g: EvacuationGraph, origin: int, edge_ids: Sequence[int], *,
              lenient_expiry: bool = False) -> EvacPath | None:
    """Build an EvacPath, or None when the departure window is empty."""
    window, cap, offsets = path_window(g, origin, edge_ids,
                                       lenient_expiry=lenient_expiry)
    if len(window) == 0:
        return None
    dest = g.edges[edge_ids[-1]].head
    if g.nodes[dest].kind is not NodeKind.SAFE:
        raise ValueError(f"path must end at a safe node, got {dest}")
    return EvacPath(origin=origin, edges=tuple(edge_ids), offsets=offsets,
                    window=window, capacity=cap)


def enumerate_simple_paths(g: EvacuationGraph, origin: int, *,
                           max_paths: int | None = None,
                           max_edges: int | None = None) -> Iterator[list[int]]:
    """Yield every simple edge sequence from ``origin`` to a safe node.

    Deterministic order (edge ids ascending at every branch).  Paths stop at
    the first safe node reached.  Intended for oracles and exhaustive pools on
    desk-size instances; guard with ``max_paths``/``max_edges`` elsewhere.
    """
    limit = max_edges if max_edges is not None else len(g.nodes)
    count = 0
    stack: list[tuple[int, list[int], set[int]]] = [(origin, [], {origin})]
    while stack:
        node, prefix, visited = stack.pop()
        # expand in reverse so that lower edge ids pop first
        for ei in reversed(g.out_edges[node]):
            head = g.edges[ei].head
            if head in visited:
                continue
            route = prefix + [ei]
            if g.nodes[head].kind is NodeKind.SAFE:
                yield route
                count += 1
                if max_paths is not None and count >= max_paths:
                    return
            elif len(route) < limit:
                stack.append((head, route, visited | {head}))


# -- validation ---------------------------------------------------------------

@dataclass
class ValidationReport:
    violations: list[str]
    unsatisfiable: list[int]   # evacuated ids with demand that cannot reach safety
    isolated: list[int]        # nodes with no incident edges
    stats: dict[str, float]

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_instance(g: EvacuationGraph) -> ValidationReport:
    """Structural and semantic checks; never raises for bad data, reports it."""
    viol: list[str] = []
    H = g.horizon
    for n, nd in sorted(g.nodes.items()):
        if nd.kind is NodeKind.EVACUATED:
            if nd.deadline is not None and not (0 <= nd.deadline <= H):
                viol.append(f"node {n}: deadline {nd.deadline} outside [0, {H}]")
            if nd.demand > 0 and not g.out_edges[n]:
                viol.append(f"node {n}: demand {nd.demand} but no outgoing edge")
    for ei, e in enumerate(g.edges):
        if e.expiry is not None and not (0 <= e.expiry <= H):
            viol.append(f"edge {ei}: expiry {e.expiry} outside [0, {H}]")
    isolated = [n for n in g.node_ids() if not g.out_edges[n] and not g.in_edges[n]]

    te = build_time_expanded_graph(g)
    safe_fed = set()
    for ai in range(te.n_arcs):
        if te.arc_kind[ai] == ARC_SINK:
            safe_fed.add(te.split(te.arc_tail[ai])[0])
    stats = {
        "nodes": len(g.nodes),
        "evacuated": len(g.evacuated_ids()),
        "transit": len(g.transit_ids()),
        "safe": len(g.safe_ids()),
        "edges": len(g.edges),
        "horizon": H,
        "total_demand": g.total_demand(),
        "time_arcs": te.n_arcs,
        "reachable_safe": len(safe_fed),
    }
    return ValidationReport(violations=viol, unsatisfiable=list(te.unsatisfiable),
                            isolated=isolated, stats=stats)


def format_clock(step: int, step_seconds: int) -> str:
    """Render a step index as HHhMM from a 00h00 start (e.g. 163 @300s -> 13h35)."""
    total_min = step * step_seconds // 60
    return f"{total_min // 60:02d}h{total_min % 60:02d}"
