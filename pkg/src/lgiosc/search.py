"""Gossip content search over the subscription graph.

The forwarding itself is done by the law (``search`` and ``query_arrived``
rules); this module starts queries, gathers the hits that reach the origin,
and provides the breadth-first reachability oracle used to audit them.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .controller import Envelope, on_network_arrival
from .terms import LIST, Term, atom, functor_name, mklist, to_text

DEFAULT_TTL = 5
DEFAULT_THRESHOLD = 3


class SearchError(ValueError):
    pass


@dataclass(frozen=True)
class SearchQuery:
    qid: Term
    predicate: object
    ttl: int
    threshold: int
    origin: Term
    hops: int = 0

    def to_term(self) -> Term:
        return Term("query", (self.qid, self.predicate, self.origin, self.ttl, self.threshold, self.hops))


@dataclass
class SearchResult:
    qid: Term
    hits: set = field(default_factory=set)
    hops: dict = field(default_factory=dict)

    @property
    def contributors(self) -> set[str]:
        return {name for name, _ in self.hits}


def neighbor_graph(controllers) -> dict[str, set[str]]:
    """Undirected subscription graph: subscribers plus subscribees."""
    graph: dict[str, set[str]] = {}
    for c in controllers:
        if c.state is None or c.agent is None:
            continue
        me = c.name
        graph.setdefault(me, set())
        for t in c.state.bucket("subscriber"):
            other = functor_name(t.args[1])
            graph[me].add(other)
            graph.setdefault(other, set()).add(me)
        for t in c.state.bucket("subscribedTo"):
            other = functor_name(t.args[0])
            graph[me].add(other)
            graph.setdefault(other, set()).add(me)
    return graph


def bfs_oracle(graph: dict, origin: str, ttl: int) -> set[str]:
    """Nodes within ``ttl`` hops of ``origin``."""
    seen = {origin}
    frontier = deque([(origin, 0)])
    while frontier:
        node, d = frontier.popleft()
        if d == ttl:
            continue
        for n in graph.get(node, ()):
            if n not in seen:
                seen.add(n)
                frontier.append((n, d + 1))
    return seen


def start_search(net, name: str, predicate, ttl: int = DEFAULT_TTL,
                 threshold: int = DEFAULT_THRESHOLD, qid: Term | None = None) -> Term:
    if ttl < 0 or threshold < 0:
        raise SearchError("ttl and threshold must be non-negative")
    c = net.controller(name)
    if not c.alive:
        raise SearchError(f"{name} is not a live member")
    qid = qid if qid is not None else net.new_qid()
    net.trace.append("search", qid, c.agent, ttl, threshold, predicate)
    net.send(name, c.agent, Term("search", (qid, predicate, ttl, threshold)))
    return qid


def collect_result(c, qid: Term) -> SearchResult:
    result = SearchResult(qid)
    for _, msg in c.delivered:
        if isinstance(msg, Term) and msg.functor == "hit" and msg.arity == 4 and msg.args[0] == qid:
            _, who, hops, ids = msg.args
            if not (isinstance(ids, Term) and ids.functor == LIST):
                continue
            for pid in ids.args:
                key = (functor_name(who), pid)
                result.hits.add(key)
                result.hops[key] = min(hops, result.hops.get(key, hops))
    return result


def initiate_search(net, name: str, predicate, ttl: int = DEFAULT_TTL,
                    threshold: int = DEFAULT_THRESHOLD) -> SearchResult:
    """Start a query at ``name``, drain the network, and gather the hits."""
    qid = start_search(net, name, predicate, ttl, threshold)
    net.drain(Term("search", (qid,)))
    result = collect_result(net.controller(name), qid)
    net.trace.append(
        "search_result", qid,
        mklist(Term("hit", (atom(who), pid, result.hops[(who, pid)]))
               for who, pid in sorted(result.hits, key=lambda h: (h[0], to_text(h[1])))),
    )
    return result


def handle_query(c, q: SearchQuery, sender: Term) -> list:
    """Feed one query envelope from ``sender`` straight into controller ``c``.

    The envelope bypasses the network queues; meant for unit-level probing.
    """
    return on_network_arrival(c, Envelope(sender, c.agent, q.to_term(), c.law.hash))
