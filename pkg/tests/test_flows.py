"""Aggregate flow bounds: max volume, departure push, implicit cost, static routes."""

from __future__ import annotations

import pytest

from evacflow.flows import (ModelInfeasible, build_ff_i_lp, delta_upper_bound,
                            departure_cost, solve_ff, solve_ff_bar, solve_ff_e,
                            solve_ff_i, solve_ff_lp, verify_flow)
from evacflow.graph import (Edge, EvacuationGraph, Node, NodeKind,
                            build_time_expanded_graph)
from evacflow.lp import SolveBudget, solve_lp

from conftest import medium_instance, small_instance
from oracles import te_max_flow

TOL = 1e-6


def _expand(g: EvacuationGraph, **kw):
    return build_time_expanded_graph(g, **kw)


# -- max volume ------------------------------------------------------------------


def test_corridor_fills_every_departure_step(single_corridor):
    sol = solve_ff(_expand(single_corridor))
    assert sol.phi == pytest.approx(15.0, abs=TOL)      # 3 steps x capacity 5
    assert sol.per_node == pytest.approx({0: 15.0})
    assert sol.unserved == pytest.approx({0: 5.0})


def test_zero_demand_yields_zero_volume():
    nodes = [Node(0, NodeKind.EVACUATED, demand=0.0, deadline=3),
             Node(1, NodeKind.SAFE)]
    g = EvacuationGraph(nodes, [Edge(0, 1, 1, 5.0)], horizon=4)
    sol = solve_ff(_expand(g))
    assert sol.phi == 0.0
    assert sol.unserved == {}


@pytest.mark.parametrize("seed", range(8))
def test_volume_never_exceeds_demand(seed):
    g = medium_instance(seed)
    assert solve_ff(_expand(g)).phi <= g.total_demand() + TOL


@pytest.mark.parametrize("seed", range(10))
def test_max_volume_matches_independent_augmenting_search(seed):
    te = _expand(medium_instance(seed))
    sol = solve_ff(te)
    assert sol.phi == pytest.approx(te_max_flow(te), abs=1e-6)
    assert sol.phi == pytest.approx(solve_ff_lp(te).phi, abs=1e-6)


@pytest.mark.parametrize("seed", range(6))
def test_flows_satisfy_conservation_and_capacity(seed):
    te = _expand(medium_instance(seed), with_overflow=True)
    for sol in (solve_ff(te), solve_ff_i(te)):
        assert sol.arc_flow is not None
        assert verify_flow(te, sol.arc_flow) <= 1e-6


# -- latest first departure --------------------------------------------------------


def test_departure_push_on_the_corridor(single_corridor):
    te = _expand(single_corridor)
    assert solve_ff_e(te, 15.0).delta_step == 0    # needs all three steps
    assert solve_ff_e(te, 10.0).delta_step == 1
    assert solve_ff_e(te, 5.0).delta_step == 2     # one step suffices
    sol = solve_ff_e(te, 5.0)
    assert sol.phi >= 5.0 - TOL


def test_departure_push_with_nothing_to_move(single_corridor):
    te = _expand(single_corridor)
    sol = solve_ff_e(te, 0.0)
    assert sol.phi == 0.0
    assert sol.delta_step == delta_upper_bound(single_corridor) == 2


def test_departure_push_rejects_unreachable_volume(single_corridor):
    with pytest.raises(ModelInfeasible):
        solve_ff_e(_expand(single_corridor), 16.0)


@pytest.mark.parametrize("seed", range(6))
def test_bisection_agrees_with_binary_formulation(seed):
    g = small_instance(seed)
    te = _expand(g)
    target = solve_ff(te).phi
    fast = solve_ff_e(te, target)
    exact = solve_ff_e(te, target, method="mip", budget=SolveBudget(gap=1e-9))
    if exact.status == "Optimal":
        assert fast.objective == pytest.approx(exact.objective, abs=1e-6)
        assert fast.phi >= target - 1e-6


def test_deadlines_cap_the_push():
    nodes = [Node(0, NodeKind.EVACUATED, demand=4.0, deadline=3),
             Node(1, NodeKind.EVACUATED, demand=0.0, deadline=5),
             Node(2, NodeKind.SAFE)]
    edges = [Edge(0, 2, 1, 9.0), Edge(1, 2, 1, 9.0)]
    g = EvacuationGraph(nodes, edges, horizon=8)
    assert delta_upper_bound(g) == 3       # only demand-bearing deadlines count
    nodes2 = [Node(0, NodeKind.EVACUATED, demand=0.0, deadline=3),
              Node(1, NodeKind.EVACUATED, demand=0.0, deadline=5),
              Node(2, NodeKind.SAFE)]
    assert delta_upper_bound(EvacuationGraph(nodes2, edges, horizon=8)) == 3


# -- implicit departure pricing ----------------------------------------------------


def test_departure_cost_declines_toward_the_horizon():
    assert departure_cost(10, 0) == pytest.approx(1.0)
    assert departure_cost(10, 10) == pytest.approx(0.0)
    costs = [departure_cost(10, t) for t in range(11)]
    assert costs == sorted(costs, reverse=True)


def test_routing_all_demand_requires_overflow_arcs(single_corridor):
    te = _expand(single_corridor)          # built without overflow drains
    with pytest.raises(ValueError):
        solve_ff_i(te)
    with pytest.raises(ValueError):
        solve_ff_bar(te)


@pytest.mark.parametrize("seed", range(10))
def test_implicit_pricing_keeps_the_max_volume(seed):
    g = medium_instance(seed)
    phi_ff = solve_ff(_expand(g)).phi
    sol = solve_ff_i(_expand(g, with_overflow=True))
    assert sol.phi == pytest.approx(phi_ff, abs=1e-6)


@pytest.mark.parametrize("seed", range(6))
def test_implicit_pricing_never_departs_earlier(seed):
    g = medium_instance(seed)
    ff = solve_ff(_expand(g))
    ffi = solve_ff_i(_expand(g, with_overflow=True))
    assert ffi.delta_step >= ff.delta_step


@pytest.mark.parametrize("seed", range(6))
def test_implicit_pricing_matches_its_lp_twin(seed):
    te = _expand(small_instance(seed), with_overflow=True)
    combinatorial = solve_ff_i(te)
    m, _ = build_ff_i_lp(te)
    lp = solve_lp(m)
    assert lp.status.value == "Optimal"
    assert combinatorial.objective == pytest.approx(lp.objective, abs=1e-5)


def test_unreachable_demand_drains_at_the_stated_price():
    nodes = [Node(0, NodeKind.EVACUATED, demand=7.0, deadline=5),
             Node(1, NodeKind.EVACUATED, demand=10.0, deadline=5),
             Node(2, NodeKind.SAFE)]
    g = EvacuationGraph(nodes, [Edge(1, 2, 1, 20.0)], horizon=6)
    te = _expand(g, with_overflow=True)
    sol = solve_ff_i(te, unserved_penalty=1000.0)
    assert sol.phi == pytest.approx(10.0)
    assert sol.unserved == pytest.approx({0: 7.0})
    # 7 stranded units at 1000 each, plus at most 1 per unit actually moved
    assert 7000.0 - TOL <= sol.objective <= 7000.0 + 10.0 + TOL


# -- static route choice -----------------------------------------------------------


def test_static_routes_on_a_tree_lose_nothing(single_corridor):
    te = _expand(single_corridor, with_overflow=True)
    bar = solve_ff_bar(te, SolveBudget(gap=1e-9))
    assert bar.phi == pytest.approx(15.0, abs=TOL)
    assert bar.used_edges == (0, 1)


def test_two_way_roads_collapse_to_one_direction():
    nodes = [Node(0, NodeKind.EVACUATED, demand=6.0, deadline=4),
             Node(1, NodeKind.TRANSIT),
             Node(2, NodeKind.TRANSIT),
             Node(3, NodeKind.SAFE)]
    edges = [Edge(0, 1, 1, 6.0),
             Edge(1, 2, 1, 6.0), Edge(2, 1, 1, 6.0),   # anti-parallel pair
             Edge(2, 3, 1, 6.0)]
    g = EvacuationGraph(nodes, edges, horizon=8)
    bar = solve_ff_bar(_expand(g, with_overflow=True), SolveBudget(gap=1e-9))
    assert bar.used_edges is not None
    assert not (1 in bar.used_edges and 2 in bar.used_edges)


def test_branch_limit_forces_a_single_exit_choice():
    nodes = [Node(0, NodeKind.EVACUATED, demand=30.0, deadline=2),
             Node(1, NodeKind.TRANSIT),
             Node(2, NodeKind.SAFE),
             Node(3, NodeKind.SAFE)]
    edges = [Edge(0, 1, 1, 10.0),
             Edge(1, 2, 1, 5.0), Edge(1, 3, 1, 5.0)]
    g = EvacuationGraph(nodes, edges, horizon=6)
    phi_free = solve_ff(_expand(g)).phi
    assert phi_free == pytest.approx(30.0, abs=TOL)    # both exits together
    bar = solve_ff_bar(_expand(g, with_overflow=True), SolveBudget(gap=1e-9))
    assert bar.phi == pytest.approx(15.0, abs=TOL)     # one open exit only


@pytest.mark.parametrize("seed", range(5))
def test_static_routes_never_beat_free_routing(seed):
    g = small_instance(seed)
    phi_free = solve_ff(_expand(g)).phi
    bar = solve_ff_bar(_expand(g, with_overflow=True),
                       SolveBudget(time_limit=20.0))
    assert bar.phi <= phi_free + 1e-6


def test_report_dict_carries_the_headline_numbers(single_corridor):
    sol = solve_ff(_expand(single_corridor))
    rep = sol.to_report_dict(single_corridor)
    assert rep["phi"] == pytest.approx(15.0)
    assert rep["evacuated_pct"] == pytest.approx(75.0)
    assert rep["model"] == "ff"
    assert rep["instance"]["horizon"] == 6
