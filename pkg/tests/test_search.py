import random

import pytest

from conftest import graph_network, random_graph
from lgiosc.search import (
    DEFAULT_THRESHOLD, DEFAULT_TTL, SearchError, SearchQuery, bfs_oracle, handle_query, initiate_search,
    neighbor_graph,
)
from lgiosc.simnet.checks import check_trace
from lgiosc.terms import atom, parse_term

ANY = parse_term("post(_, _, _, _)")
SEVEN = [("b", "a"), ("c", "b"), ("d", "c"), ("e", "a"), ("f", "e"), ("g", "f")]


def test_defaults():
    assert (DEFAULT_TTL, DEFAULT_THRESHOLD) == (5, 3)


def test_bfs_oracle():
    g = {"a": {"b"}, "b": {"a", "c"}, "c": {"b"}}
    assert bfs_oracle(g, "a", 0) == {"a"}
    assert bfs_oracle(g, "a", 1) == {"a", "b"}
    assert bfs_oracle(g, "a", 5) == {"a", "b", "c"}
    assert bfs_oracle({}, "z", 3) == {"z"}


@pytest.mark.parametrize("ttl, expected", [
    (0, "a"), (1, "abe"), (2, "abcef"), (3, "abcdefg"), (4, "abcdefg"),
])
def test_seven_node_fixture_hand_enumerated(ttl, expected):
    net = graph_network(list("abcdefg"), SEVEN)
    res = initiate_search(net, "a", ANY, ttl, 3)
    assert res.contributors == set(expected)
    assert all(h <= ttl for h in res.hops.values())
    assert check_trace(net.trace).ok


def test_ttl_zero_searches_only_local_database():
    net = graph_network(list("abc"), [("b", "a"), ("c", "a")])
    res = initiate_search(net, "a", ANY, 0, 3)
    assert res.hits == {("a", parse_term("id(a, 1)"))}
    assert not any(e.functor == "env" and e.args[5].functor == "query" for e in net.trace)


def test_predicate_filters_hits():
    net = graph_network(list("ab"), [("b", "a")])
    net.send("b", atom("b"), parse_term('publish(post(#social#, "party"))'))
    net.drain()
    res = initiate_search(net, "a", parse_term("post(_, _, #social#, _)"), 2, 3)
    assert res.hits == {("b", parse_term("id(b, 2)"))}


def test_threshold_caps_fanout():
    star = [(f"s{i}", "hub") for i in range(6)]
    net = graph_network(["hub"] + [f"s{i}" for i in range(6)], star)
    res = initiate_search(net, "hub", ANY, 1, 2)
    assert res.contributors == {"hub", "s0", "s1"}


def test_bad_parameters_and_dead_origin():
    net = graph_network(list("ab"), [("b", "a")])
    with pytest.raises(SearchError):
        initiate_search(net, "a", ANY, -1, 3)
    with pytest.raises(SearchError):
        initiate_search(net, "a", ANY, 1, -2)
    net.controller("b").alive = False
    with pytest.raises(SearchError):
        initiate_search(net, "b", ANY, 1, 1)


def test_handle_query_runs_the_arrival_rule():
    net = graph_network(list("ab"), [("b", "a")], publish=False)
    q = SearchQuery(atom("qx"), ANY, 0, 2, atom("a"), 1)
    handle_query(net.controller("b"), q, atom("a"))
    assert any(e.functor == "db" and e.args[2].functor == "search" for e in net.trace)


def test_random_twenty_node_graphs_reach_oracle_exactly():
    rng = random.Random(20)
    for g in range(5):
        names, edges = random_graph(rng, 20)
        net = graph_network(names, edges, seed=g)
        graph = neighbor_graph(net.live())
        thr = max(len(v) for v in graph.values())
        origin = rng.choice(names)
        for ttl in range(4):
            assert initiate_search(net, origin, ANY, ttl, thr).contributors == bfs_oracle(graph, origin, ttl)
        assert check_trace(net.trace).ok
