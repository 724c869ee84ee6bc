"""Shared fixtures: canned networks, seeded instance families, and the
acceptance scoreboard printed at the end of every run."""

from __future__ import annotations

import time

import hypothesis
import pytest

from evacflow.graph import Edge, EvacuationGraph, Node, NodeKind
from evacflow.instances import GenParams, generate_synthetic

hypothesis.settings.register_profile(
    "suite", max_examples=40, deadline=None, derandomize=True)
hypothesis.settings.load_profile("suite")


# -- instance families ---------------------------------------------------------


def small_family(seed: int) -> GenParams:
    """Tiny instances (2-4 areas, <= 6 simple routes per area) where the
    route-assignment space can be enumerated outright."""
    n_ev = 2 + seed % 3
    return GenParams(n_evacuated=n_ev, n_transit=3, n_safe=2,
                     n_edges=7 + n_ev, horizon=8 + seed % 5,
                     demand_range=(5, 40), capacity_range=(2, 8),
                     travel_range=(1, 3), expiry_prob=0.3, seed=seed,
                     name=f"small{seed}")


def medium_family(seed: int) -> GenParams:
    """Mid-size fuzz instances (3-5 areas) for bound-chain and audit sweeps."""
    size = seed % 3
    return GenParams(n_evacuated=3 + size, n_transit=4 + size, n_safe=2,
                     n_edges=14 + 4 * size, horizon=8 + seed % 9,
                     demand_range=(10, 90), capacity_range=(2, 9),
                     travel_range=(1, 3), expiry_prob=0.35, seed=seed,
                     name=f"mid{seed}")


def small_instance(seed: int) -> EvacuationGraph:
    return generate_synthetic(small_family(seed))


def medium_instance(seed: int) -> EvacuationGraph:
    return generate_synthetic(medium_family(seed))


@pytest.fixture
def toy_diamond() -> EvacuationGraph:
    return generate_synthetic("toy-diamond")


@pytest.fixture
def single_corridor() -> EvacuationGraph:
    """One area, one two-hop route, capacity 5: demand 20 over 3 usable steps."""
    nodes = [Node(0, NodeKind.EVACUATED, demand=20.0, deadline=2),
             Node(1, NodeKind.TRANSIT),
             Node(2, NodeKind.SAFE)]
    edges = [Edge(0, 1, travel_time=1, capacity=5.0),
             Edge(1, 2, travel_time=1, capacity=5.0)]
    return EvacuationGraph(nodes, edges, horizon=6, name="corridor")


@pytest.fixture
def shared_bottleneck() -> EvacuationGraph:
    """Two areas with private ramps onto one shared road: the classic
    conflict instance (either area alone could saturate the shared road)."""
    nodes = [Node(0, NodeKind.EVACUATED, demand=12.0, deadline=3),
             Node(1, NodeKind.EVACUATED, demand=12.0, deadline=3),
             Node(2, NodeKind.TRANSIT),
             Node(3, NodeKind.SAFE),
             Node(4, NodeKind.SAFE)]
    edges = [Edge(0, 2, travel_time=1, capacity=4.0),
             Edge(1, 2, travel_time=1, capacity=4.0),
             Edge(2, 3, travel_time=1, capacity=4.0),   # shared, scarce
             Edge(1, 4, travel_time=2, capacity=3.0)]   # private detour for 1
    return EvacuationGraph(nodes, edges, horizon=8, name="shared-bottleneck")


# -- acceptance scoreboard -------------------------------------------------------

ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}
_SESSION_T0 = time.monotonic()


def record_criterion(number: int, title: str, ok: bool, detail: str) -> None:
    ACCEPTANCE[number] = (title, bool(ok), detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.ensure_newline()
    tr.section("acceptance criteria", sep="=")
    for number in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[number]
        word = "PASS" if ok else "FAIL"
        tr.write_line(f"[{word}] criterion {number}: {title} — {detail}")
    elapsed = time.monotonic() - _SESSION_T0
    failed = len(tr.stats.get("failed", [])) + len(tr.stats.get("error", []))
    suite_ok = failed == 0 and elapsed < 300.0
    word = "PASS" if suite_ok else "FAIL"
    tr.write_line(f"[{word}] criterion 8: invariant suites in one test command "
                  f"— {failed} failures, wall {elapsed:.1f}s (budget 300s)")
