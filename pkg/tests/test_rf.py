"""Exact one-route-per-origin model: optimality, variants, size guard."""

from __future__ import annotations

import pytest

from evacflow.flows import solve_ff
from evacflow.graph import (Edge, EvacuationGraph, Node, NodeKind,
                            build_time_expanded_graph)
from evacflow.lp import SolveBudget
from evacflow.plans import verify_plan
from evacflow.rf import (RfTooLarge, build_rf, rf_size_estimate,
                         solve_rf_variant)

from conftest import small_instance
from oracles import assignment_optimum

TIGHT = SolveBudget(gap=1e-9)


def _expand(g, **kw):
    return build_time_expanded_graph(g, **kw)


def _solve(g, variant="base", **kw):
    te = _expand(g, with_overflow=(variant == "I"))
    return solve_rf_variant(variant, g, te, TIGHT, **kw)


# -- correctness against the route-assignment oracle -------------------------------


@pytest.mark.parametrize("seed", range(6))
def test_optimum_matches_route_assignment_enumeration(seed):
    g = small_instance(seed)
    res = _solve(g)
    assert res.status == "Optimal"
    assert res.phi == pytest.approx(assignment_optimum(g), abs=1e-6)


@pytest.mark.parametrize("seed", range(6))
def test_extracted_plans_pass_the_auditor(seed):
    g = small_instance(seed)
    res = _solve(g)
    check = verify_plan(g, res.plan)
    assert check.ok, check.violations
    assert check.phi == pytest.approx(res.phi, abs=1e-6)


@pytest.mark.parametrize("seed", range(6))
def test_single_route_volume_never_beats_free_flow(seed):
    g = small_instance(seed)
    assert _solve(g).phi <= solve_ff(_expand(g)).phi + 1e-6


def test_one_route_per_origin_costs_volume_when_splitting_pays():
    nodes = [Node(0, NodeKind.EVACUATED, demand=10.0, deadline=1),
             Node(1, NodeKind.SAFE),
             Node(2, NodeKind.SAFE)]
    edges = [Edge(0, 1, 1, 3.0), Edge(0, 2, 1, 2.0)]
    g = EvacuationGraph(nodes, edges, horizon=4)
    assert solve_ff(_expand(g)).phi == pytest.approx(10.0)   # 2 steps x (3+2)
    res = _solve(g)
    assert res.phi == pytest.approx(6.0)                      # 2 steps x 3
    assert len(res.plan.assignments) == 1
    assert res.plan.assignments[0].edges == (0,)


def test_single_route_instance_loses_nothing(single_corridor):
    res = _solve(single_corridor)
    assert res.phi == pytest.approx(solve_ff(_expand(single_corridor)).phi)
    assert res.plan.assignments[0].route == (0, 1)
    assert sum(v for _, v in res.plan.assignments[0].departures) \
        == pytest.approx(15.0)


def test_shared_road_is_split_across_origin_schedules(shared_bottleneck):
    res = _solve(shared_bottleneck)
    assert res.status == "Optimal"
    check = verify_plan(shared_bottleneck, res.plan)
    assert check.ok, check.violations
    assert res.phi == pytest.approx(assignment_optimum(shared_bottleneck),
                                    abs=1e-6)


# -- variants ----------------------------------------------------------------------


def test_unknown_variant_is_rejected(single_corridor):
    with pytest.raises(ValueError):
        _solve(single_corridor, variant="Q")


def test_priced_variant_needs_overflow_arcs(single_corridor):
    te = _expand(single_corridor)
    with pytest.raises(ValueError):
        solve_rf_variant("I", single_corridor, te)


@pytest.mark.parametrize("seed", range(4))
def test_priced_variant_keeps_the_base_volume(seed):
    g = small_instance(seed)
    base = _solve(g)
    priced = _solve(g, variant="I")
    assert priced.phi == pytest.approx(base.phi, abs=1e-6)
    assert verify_plan(g, priced.plan).ok


@pytest.mark.parametrize("seed", range(4))
def test_push_variant_keeps_volume_and_delays_departures(seed):
    g = small_instance(seed)
    base = _solve(g)
    pushed = _solve(g, variant="E")
    if pushed.status != "Optimal":
        pytest.skip("push rewrite not proven optimal within budget")
    assert pushed.phi >= base.phi - 1e-6
    assert pushed.delta_step >= base.delta_step
    assert verify_plan(g, pushed.plan).ok


def test_push_variant_on_the_corridor(single_corridor):
    pushed = _solve(single_corridor, variant="E")
    # the full 15 need every step, so the first departure cannot move
    assert pushed.phi == pytest.approx(15.0, abs=1e-6)
    assert pushed.delta_step == 0
    assert pushed.objective == pytest.approx(0.0, abs=1e-6)


# -- size guard --------------------------------------------------------------------


def test_size_guard_refuses_oversized_builds(single_corridor):
    te = _expand(single_corridor)
    with pytest.raises(RfTooLarge, match="too large"):
        build_rf(single_corridor, te, var_budget=10)
    with pytest.raises(RfTooLarge):
        solve_rf_variant("base", single_corridor, te, var_budget=10)


def test_size_estimate_matches_the_built_model(single_corridor,
                                               shared_bottleneck):
    for g in (single_corridor, shared_bottleneck):
        te = _expand(g)
        est = rf_size_estimate(g, te)
        h = build_rf(g, te)
        assert est["variables"] == h.model.num_vars
        assert est["binaries"] == sum(h.model.is_int)
        assert est["continuous"] == h.model.num_vars - sum(h.model.is_int)
        assert est["rows"] >= h.model.num_rows
        assert est["commodities"] == len(h.ks)


@pytest.mark.parametrize("seed", range(4))
def test_size_estimate_never_undercounts(seed):
    g = small_instance(seed)
    te = _expand(g)
    est = rf_size_estimate(g, te)
    h = build_rf(g, te)
    assert est["variables"] >= h.model.num_vars
    assert est["rows"] >= h.model.num_rows
    assert est["binaries"] == sum(h.model.is_int)
