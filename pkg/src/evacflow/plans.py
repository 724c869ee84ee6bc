"""Evacuation plans: who leaves where, when, along which route.

A plan is a list of (origin, route, departure schedule) assignments plus the
fingerprint of the instance it was built for.  ``verify_plan`` re-derives every
route window from the instance and checks schedule feasibility and shared road
capacity; it is the arbiter used by the tests and by ``evacflow solve --out``.

Serialized form (``evacplan/1``) is plain JSON so downstream tooling can read
it without this package.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .graph import EvacPath, EvacuationGraph, make_path
from .instances import dumps as _dump_instance


def instance_fingerprint(g: EvacuationGraph) -> str:
    """Stable hex digest of the canonical text form."""
    return hashlib.sha256(_dump_instance(g).encode()).hexdigest()[:16]


@dataclass
class PlanAssignment:
    origin: int
    edges: tuple[int, ...]                    # static edge ids, in travel order
    departures: tuple[tuple[int, float], ...]  # (step, volume), step ascending

    @property
    def volume(self) -> float:
        return sum(v for _, v in self.departures)


@dataclass
class EvacuationPlan:
    model: str
    instance_name: str
    fingerprint: str
    horizon: int
    assignments: list[PlanAssignment] = field(default_factory=list)
    objective: float | None = None
    meta: dict = field(default_factory=dict)

    @property
    def phi(self) -> float:
        return sum(a.volume for a in self.assignments)

    def arrivals(self, g: EvacuationGraph) -> list[tuple[int, int, int, float]]:
        """(origin, depart, arrive, volume) rows, sorted by departure."""
        rows = []
        for a in self.assignments:
            travel = sum(g.edges[e].travel_time for e in a.edges)
            for t, v in a.departures:
                rows.append((a.origin, t, t + travel, v))
        rows.sort(key=lambda r: (r[1], r[0]))
        return rows

    def makespan(self, g: EvacuationGraph) -> int:
        rows = self.arrivals(g)
        return max((r[2] for r in rows), default=0)

    def to_json_dict(self) -> dict:
        return {
            "version": "evacplan/1",
            "model": self.model,
            "instance": {"name": self.instance_name,
                         "fingerprint": self.fingerprint,
                         "horizon": self.horizon},
            "phi": self.phi,
            "objective": self.objective,
            "meta": self.meta,
            "assignments": [
                {"origin": a.origin,
                 "edges": list(a.edges),
                 "departures": [[t, v] for t, v in a.departures]}
                for a in self.assignments
            ],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "EvacuationPlan":
        if d.get("version") != "evacplan/1":
            raise ValueError(f"not an evacplan/1 document: {d.get('version')!r}")
        inst = d.get("instance", {})
        plan = cls(model=d.get("model", "?"),
                   instance_name=inst.get("name", ""),
                   fingerprint=inst.get("fingerprint", ""),
                   horizon=int(inst.get("horizon", 0)),
                   objective=d.get("objective"),
                   meta=d.get("meta", {}))
        for row in d.get("assignments", []):
            plan.assignments.append(PlanAssignment(
                origin=int(row["origin"]),
                edges=tuple(int(e) for e in row["edges"]),
                departures=tuple((int(t), float(v))
                                 for t, v in row["departures"])))
        return plan

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "EvacuationPlan":
        return cls.from_json_dict(json.loads(Path(path).read_text()))


def plan_from_assignments(g: EvacuationGraph, model: str,
                          rows: list[tuple[int, tuple[int, ...],
                                           list[tuple[int, float]]]],
                          objective: float | None = None,
                          meta: dict | None = None) -> EvacuationPlan:
    plan = EvacuationPlan(model=model, instance_name=g.name,
                          fingerprint=instance_fingerprint(g),
                          horizon=g.horizon, objective=objective,
                          meta=meta or {})
    for origin, edges, deps in rows:
        deps = [(int(t), float(v)) for t, v in deps if v > 1e-9]
        if not deps:
            continue
        deps.sort()
        plan.assignments.append(PlanAssignment(origin, tuple(edges),
                                               tuple(deps)))
    return plan


@dataclass
class PlanCheck:
    ok: bool
    phi: float
    violations: list[str]
    worst_overload: float = 0.0


def verify_plan(g: EvacuationGraph, plan: EvacuationPlan, *,
                lenient_expiry: bool = False, tol: float = 1e-6) -> PlanCheck:
    """Re-derive every route from the instance and audit the schedule.

    Checks: fingerprint match, route validity (chained edges from an evacuated
    node to a safe node), departures inside the feasible window, per-origin
    volume within demand, and aggregate load per (road, entry step) within
    capacity.
    """
    v: list[str] = []
    fp = instance_fingerprint(g)
    if plan.fingerprint and plan.fingerprint != fp:
        v.append(f"fingerprint mismatch: plan {plan.fingerprint} vs instance {fp}")
    if plan.horizon and plan.horizon != g.horizon:
        v.append(f"horizon mismatch: plan {plan.horizon} vs instance {g.horizon}")

    load: dict[tuple[int, int], float] = {}
    by_origin: dict[int, float] = {}
    phi = 0.0
    for idx, a in enumerate(plan.assignments):
        tag = f"assignment[{idx}] origin {a.origin}"
        path = make_path(g, a.origin, a.edges, lenient_expiry=lenient_expiry) \
            if a.origin in g.nodes else None
        if path is None:
            v.append(f"{tag}: route {a.edges} is not a feasible evacuation path")
            continue
        for t, vol in a.departures:
            if vol < -tol:
                v.append(f"{tag}: negative volume {vol} at step {t}")
            if t not in path.window:
                v.append(f"{tag}: departure step {t} outside window "
                         f"[{path.window.start}, {path.window.stop - 1}]")
            for e, off in zip(path.edges, path.offsets):
                key = (e, t + off)
                load[key] = load.get(key, 0.0) + vol
        by_origin[a.origin] = by_origin.get(a.origin, 0.0) + a.volume
        phi += a.volume

    for origin, vol in sorted(by_origin.items()):
        demand = g.nodes[origin].demand
        if vol > demand + tol:
            v.append(f"origin {origin}: scheduled volume {vol} exceeds demand {demand}")

    worst = 0.0
    for (e, s), vol in sorted(load.items()):
        cap = g.edges[e].capacity
        if vol > cap + tol:
            worst = max(worst, vol - cap)
            v.append(f"edge {e} at step {s}: load {vol} exceeds capacity {cap}")

    return PlanCheck(ok=not v, phi=phi, violations=v, worst_overload=worst)
