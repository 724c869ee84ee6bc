"""Static networks, time expansion, route windows, validation."""

from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from evacflow.graph import (ARC_MOVE, ARC_SOURCE, ARC_WAIT, Edge,
                            EvacuationGraph, Node, NodeKind,
                            build_time_expanded_graph, edge_departure_ub,
                            enumerate_simple_paths, format_clock, make_path,
                            path_window, validate_instance)

from conftest import medium_instance, small_instance
from oracles import reachable_time_nodes, unpruned_expansion


def _one_edge(demand=5.0, deadline=None, travel=1, cap=5.0, expiry=None,
              horizon=2):
    nodes = [Node(0, NodeKind.EVACUATED, demand=demand,
                  deadline=horizon if deadline is None else deadline),
             Node(1, NodeKind.SAFE)]
    return EvacuationGraph(nodes, [Edge(0, 1, travel, cap, expiry)],
                           horizon=horizon)


# -- construction guards -------------------------------------------------------


def test_negative_capacity_rejected_at_construction():
    with pytest.raises(ValueError, match="negative capacity"):
        Edge(0, 1, travel_time=1, capacity=-2.0)


def test_negative_demand_and_missing_deadline_rejected():
    with pytest.raises(ValueError, match="negative demand"):
        Node(0, NodeKind.EVACUATED, demand=-1.0, deadline=3)
    with pytest.raises(ValueError, match="needs a deadline"):
        Node(0, NodeKind.EVACUATED, demand=1.0)


def test_duplicate_node_id_and_dangling_edge_rejected():
    n = [Node(0, NodeKind.EVACUATED, demand=1, deadline=1),
         Node(1, NodeKind.SAFE)]
    with pytest.raises(ValueError, match="duplicate node id"):
        EvacuationGraph(n + [Node(1, NodeKind.SAFE)], [], horizon=2)
    with pytest.raises(ValueError, match="undeclared node"):
        EvacuationGraph(n, [Edge(0, 7, 1, 1.0)], horizon=2)


# -- time expansion ----------------------------------------------------------


def test_single_edge_expansion_shape():
    g = _one_edge(demand=5.0, travel=1, cap=5.0, horizon=2)
    te = build_time_expanded_graph(g)
    moves = [ai for ai in range(te.n_arcs) if te.arc_kind[ai] == ARC_MOVE]
    assert len(moves) == 2                      # departures at t = 0 and 1
    assert sorted(te.arc_time[ai] for ai in moves) == [0, 1]
    src = [ai for ai in range(te.n_arcs) if te.arc_kind[ai] == ARC_SOURCE]
    assert len(src) == 1 and te.arc_cap[src[0]] == 5.0
    waited_at = {te.split(te.arc_tail[ai])[0] for ai in range(te.n_arcs)
                 if te.arc_kind[ai] == ARC_WAIT}
    assert waited_at == {0, 1}                  # both endpoints allow waiting


def test_expired_edge_blocks_departures_that_cannot_finish():
    # travel 2, expiry 5: last start at 3; deadline 4 does not bite earlier
    g = _one_edge(travel=2, expiry=5, deadline=4, horizon=12)
    assert edge_departure_ub(g, 0) == 3
    # lenient mode constrains only the start itself
    assert edge_departure_ub(g, 0, lenient_expiry=True) == 4


def test_deadline_caps_departures_from_evacuated_tails():
    g = _one_edge(travel=1, deadline=2, horizon=9)
    te = build_time_expanded_graph(g)
    last = max(te.arc_time[ai] for ai in range(te.n_arcs)
               if te.arc_kind[ai] == ARC_MOVE)
    assert last == 2


@pytest.mark.parametrize("seed", range(8))
def test_retained_time_nodes_match_double_bfs(seed):
    g = small_instance(seed)
    te = build_time_expanded_graph(g)
    n_nodes, arcs, source, sink, tn = unpruned_expansion(g)
    expected = reachable_time_nodes(n_nodes, arcs, source, sink)
    kept = set()
    for ai in range(te.n_arcs):
        for end in (te.arc_tail[ai], te.arc_head[ai]):
            if end not in (te.source, te.sink):
                kept.add(end)
    # indices coincide because both sides order nodes by sorted id
    assert kept == expected
    assert te.kept_time_nodes == len(kept)


@pytest.mark.parametrize("seed", range(8))
def test_expansion_arcs_are_sound(seed):
    g = medium_instance(seed)
    te = build_time_expanded_graph(g)
    for ai in range(te.n_arcs):
        if te.arc_kind[ai] != ARC_MOVE:
            continue
        e = g.edges[te.arc_edge[ai]]
        _, t0 = te.split(te.arc_tail[ai])
        _, t1 = te.split(te.arc_head[ai])
        assert t1 - t0 == e.travel_time
        assert t0 == te.arc_time[ai]
        assert 0 <= t0 <= edge_departure_ub(g, te.arc_edge[ai])


def test_unreachable_demand_is_reported_not_fatal():
    nodes = [Node(0, NodeKind.EVACUATED, demand=4.0, deadline=3),
             Node(1, NodeKind.SAFE)]
    g = EvacuationGraph(nodes, [Edge(0, 1, 2, 3.0, expiry=0)], horizon=6)
    te = build_time_expanded_graph(g)
    assert te.unsatisfiable == [0]
    assert validate_instance(g).unsatisfiable == [0]


def test_zero_horizon_expansion_is_empty_but_valid():
    g = _one_edge(horizon=0, deadline=0)
    te = build_time_expanded_graph(g)
    assert all(te.arc_kind[ai] != ARC_MOVE for ai in range(te.n_arcs))
    assert te.unsatisfiable == [0]


# -- route windows -----------------------------------------------------------


def test_window_respects_expiry_offset_and_deadline():
    g = _one_edge(travel=2, expiry=5, deadline=10, horizon=12, demand=1.0)
    window, cap, offsets = path_window(g, 0, [0])
    assert window == range(0, 4)        # start by 3 to finish by 5
    assert cap == 5.0 and offsets == (0,)


def test_expiry_zero_means_no_window():
    g = _one_edge(travel=1, expiry=0, horizon=5, deadline=5)
    assert make_path(g, 0, [0]) is None


def test_bottleneck_capacity_is_min_over_edges():
    nodes = [Node(0, NodeKind.EVACUATED, demand=9.0, deadline=6),
             Node(1, NodeKind.TRANSIT), Node(2, NodeKind.SAFE)]
    edges = [Edge(0, 1, 1, 4.0), Edge(1, 2, 1, 7.0)]
    g = EvacuationGraph(nodes, edges, horizon=8)
    p = make_path(g, 0, [0, 1])
    assert p is not None and p.capacity == 4.0
    assert p.offsets == (0, 1)


def test_path_must_chain_and_end_safe():
    nodes = [Node(0, NodeKind.EVACUATED, demand=1.0, deadline=4),
             Node(1, NodeKind.TRANSIT), Node(2, NodeKind.SAFE)]
    edges = [Edge(0, 1, 1, 2.0), Edge(1, 2, 1, 2.0), Edge(0, 1, 2, 2.0)]
    g = EvacuationGraph(nodes, edges, horizon=6)
    with pytest.raises(ValueError, match="does not continue"):
        path_window(g, 0, [1])
    with pytest.raises(ValueError, match="end at a safe node"):
        make_path(g, 0, [0])


@given(expiry=st.integers(1, 10), bump=st.integers(0, 5),
       deadline=st.integers(0, 10), cut=st.integers(0, 5),
       travel=st.integers(1, 3))
def test_window_monotone_in_expiry_and_deadline(expiry, bump, deadline, cut,
                                                travel):
    def win(f_e, f_i):
        g = _one_edge(travel=travel, expiry=f_e, deadline=f_i, horizon=12,
                      demand=1.0)
        return path_window(g, 0, [0])[0]

    assert len(win(expiry + bump, deadline)) >= len(win(expiry, deadline))
    assert len(win(expiry, max(deadline - cut, 0))) <= len(win(expiry, deadline))


@pytest.mark.parametrize("seed", range(6))
def test_every_enumerated_route_is_simple_and_ends_safe(seed):
    g = small_instance(seed)
    for k in g.evacuated_ids():
        for route in enumerate_simple_paths(g, k):
            visited = [k]
            for ei in route:
                assert g.edges[ei].tail == visited[-1]
                visited.append(g.edges[ei].head)
            assert len(set(visited)) == len(visited)
            assert g.kind(visited[-1]) is NodeKind.SAFE
            assert all(g.kind(n) is not NodeKind.SAFE for n in visited[1:-1])


def test_enumeration_order_is_deterministic():
    g = medium_instance(3)
    k = g.evacuated_ids()[0]
    a = [tuple(r) for r in enumerate_simple_paths(g, k)]
    b = [tuple(r) for r in enumerate_simple_paths(g, k)]
    assert a == b and len(a) == len(set(a))


# -- validation and clock ------------------------------------------------------


def test_validator_accepts_generated_instances():
    for seed in range(5):
        rep = validate_instance(medium_instance(seed))
        assert rep.ok, rep.violations
        assert rep.stats["edges"] > 0


def test_validator_flags_demand_without_exit_and_bad_bounds():
    nodes = [Node(0, NodeKind.EVACUATED, demand=3.0, deadline=99),
             Node(1, NodeKind.SAFE)]
    g = EvacuationGraph(nodes, [], horizon=5)
    rep = validate_instance(g)
    assert any("no outgoing edge" in v for v in rep.violations)
    assert any("deadline 99" in v for v in rep.violations)


def test_clock_rendering():
    assert format_clock(163, 300) == "13h35"
    assert format_clock(0, 300) == "00h00"
    assert format_clock(7, 3600) == "07h00"


def test_hypothesis_profile_is_active():
    import hypothesis
    assert hypothesis.settings().max_examples <= 60
