"""Trace audits.

``check_trace`` walks a trace once, rebuilding every controller's control
state, blacklist and database from the recorded deltas alone, and checks the
community invariants against that replay. Each check reports the indices of
the entries that break it.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

from ..search import bfs_oracle
from ..terms import LIST, Term, functor_name, match_pattern, to_text

CHECKS = (
    "dual_mediation",
    "trust",
    "group_isolation",
    "management_gating",
    "filter_soundness",
    "fanout",
    "revocation",
    "search_bounds",
    "conservation",
    "state_custody",
    "names",
    "last_ten",
    "controlled_protection",
    "db_isolation",
)

MANAGEMENT = "#management#"
PROFILE_EDITS = ("addProfile", "updateProfile", "addFilter")


@dataclass
class CheckResult:
    name: str
    offenders: list = field(default_factory=list)  # (entry index, message)

    @property
    def passed(self) -> bool:
        return not self.offenders

    @property
    def indices(self) -> list[int]:
        return sorted({i for i, _ in self.offenders})


@dataclass
class Report:
    results: dict
    tally: dict

    @property
    def ok(self) -> bool:
        return all(r.passed for r in self.results.values())

    def __getitem__(self, name) -> CheckResult:
        return self.results[name]

    def failed(self) -> list[str]:
        return [n for n, r in self.results.items() if not r.passed]

    def to_tsv(self) -> str:
        lines = ["section\tname\tstatus\tcount\tentries"]
        for name, r in self.results.items():
            idx = ",".join(str(i) for i in r.indices[:50])
            lines.append(f"check\t{name}\t{'pass' if r.passed else 'FAIL'}\t{len(r.offenders)}\t{idx}")
        for key in sorted(self.tally):
            lines.append(f"tally\t{key}\t\t{self.tally[key]}\t")
        return "\n".join(lines) + "\n"

    def details(self) -> str:
        out = []
        for name, r in self.results.items():
            for i, msg in r.offenders:
                out.append(f"{name}\t{i}\t{msg}")
        return "\n".join(out) + ("\n" if out else "")


# ---------------------------------------------------------------- helpers


def _items(t) -> tuple:
    return t.args if isinstance(t, Term) and t.functor == LIST else ()


def _is(t, functor, arity=None) -> bool:
    return isinstance(t, Term) and t.functor == functor and (arity is None or len(t.args) == arity)


def _groups(terms) -> set[str]:
    return {to_text(t.args[0]) for t in terms if _is(t, "group", 1)}


def _profile_terms(msg) -> tuple:
    """Attribute list of the ``profile([...])`` argument carried by ``msg``."""
    if isinstance(msg, Term):
        for a in msg.args:
            if _is(a, "profile", 1):
                return _items(a.args[0])
    return ()


def _ops(entry, kind):
    return [op for op in _items(entry) if _is(op, kind)]


class _State:
    """Independent re-implementation of control-state bookkeeping."""

    def __init__(self, single):
        self.single = single
        self.terms: dict[str, Term] = {}

    def add(self, t) -> None:
        f = functor_name(t)
        if f in self.single:
            for k in [k for k, v in self.terms.items() if functor_name(v) == f]:
                del self.terms[k]
        self.terms[to_text(t)] = t

    def remove(self, pattern) -> None:
        for k in [k for k, v in self.terms.items() if match_pattern(pattern, v) is not None]:
            del self.terms[k]

    def of(self, functor) -> list:
        return [v for v in self.terms.values() if functor_name(v) == functor]

    def has(self, t) -> bool:
        return to_text(t) in self.terms

    def texts(self) -> set[str]:
        return set(self.terms)


class _Audit:
    def __init__(self, trace):
        self.trace = trace
        self.bad = {name: [] for name in CHECKS}
        self.tally = defaultdict(int)
        self.laws = {}                  # hash -> {"single","controlled","internal"}
        self.cid_law = {}
        self.cid_agent = {}
        self.state: dict[str, _State] = {}
        self.blacklist = defaultdict(set)
        self.community = defaultdict(set)  # law hash -> revoked fingerprints
        self.evals = {}                 # index -> (cid, agent, event, cause, ops, deltas)
        self.envs = {}                  # eid -> (index, cause, src, dst, hash, msg)
        self.terminal = defaultdict(list)
        self.open_envs: set[int] = set()
        self.quit_at: dict[str, int] = {}
        self.adopted_names: dict[str, int] = {}
        self.deregistered: set[str] = set()
        self.manager_at_eval: dict[int, bool] = {}
        self.published = defaultdict(list)
        self.dbs = defaultdict(dict)
        self.best_ttl = {}              # (cid, qid) -> largest ttl forwarded from
        self.searches = {}              # qid -> (index, origin, ttl, thr, pred)
        self.search_replies = defaultdict(dict)  # qid -> who -> ids text set
        self.pending_searches: list = []
        self.hit_deliveries = defaultdict(list)  # qid -> [(index, who, ids)]
        self.query_forwards = defaultdict(int)

    def flag(self, check, i, msg) -> None:
        self.bad[check].append((i, msg))

    # --------------------------------------------------------- dispatch

    def run(self) -> Report:
        for i, e in enumerate(self.trace):
            if not isinstance(e, Term) or not isinstance(e.functor, str):
                self.flag("conservation", i, "unreadable entry")
                continue
            handler = getattr(self, "on_" + e.functor, None)
            if handler is not None:
                try:
                    handler(i, *e.args)
                except (TypeError, ValueError, KeyError, IndexError, AttributeError) as exc:
                    self.flag("conservation", i, f"malformed {e.functor} entry: {exc}")
        end = len(self.trace)
        for eid in sorted(self.open_envs):
            self.flag("conservation", self.envs[eid][0], f"envelope {eid} never reached a terminal")
        self._close_searches(end)
        self.tally["entries"] = len(self.trace)
        return Report({n: CheckResult(n, self.bad[n]) for n in CHECKS}, dict(self.tally))

    def law_of(self, cid):
        return self.laws.get(self.cid_law.get(cid), {"single": set(), "controlled": set(), "internal": set()})

    # --------------------------------------------------------- bootstrap

    def on_law(self, i, alias, name, h, controlled, internal, single=None):
        self.laws[h] = {
            "controlled": {functor_name(t) for t in _items(controlled)},
            "internal": {functor_name(t) for t in _items(internal)},
            "single": {functor_name(t) for t in _items(single)} if single is not None else set(),
        }

    def on_adopt(self, i, cid, agent, h, fp):
        cid, agent = functor_name(cid), functor_name(agent)
        if agent in self.adopted_names:
            self.flag("names", i, f"name {agent} adopted twice (first at {self.adopted_names[agent]})")
        if agent in self.deregistered:
            self.flag("names", i, f"deregistered name {agent} reassigned")
        self.adopted_names[agent] = i
        if fp in self.community[h]:
            self.flag("revocation", i, f"{agent} admitted with a revoked certificate")
        if h not in self.laws:
            self.flag("trust", i, f"controller {cid} adopted an unannounced law")
        self.cid_law[cid] = h
        self.cid_agent[cid] = agent
        self.state[cid] = _State(self.law_of(cid)["single"])
        self.tally["adoptions"] += 1

    def on_adopt_refused(self, i, *args):
        self.tally["adoptions_refused"] += 1

    def on_deregister(self, i, name):
        self.deregistered.add(functor_name(name))

    # --------------------------------------------------------- evaluations

    def on_eval(self, i, cid, agent, event, cause, ops, deltas, rule, diag):
        cid = functor_name(cid)
        name = functor_name(agent)
        self.tally["evaluations"] += 1
        self.evals[i] = (cid, name, event, cause, ops, deltas)
        if name in self.quit_at and event.functor != "adopted":
            self.flag("revocation", i, f"{name} evaluated after quitting at {self.quit_at[name]}")
        if _is(cause, "env", 1):
            eid = cause.args[0]
            self._terminal(i, eid, "delivered" if _items(ops) or _items(deltas) else "discarded")
            env = self.envs.get(eid)
            if env is not None and env[3] != agent:
                self.flag("dual_mediation", i, f"envelope {eid} evaluated by the wrong controller")
            if env is not None and env[4] != self.cid_law.get(cid):
                self.flag("trust", i, f"envelope {eid} under a foreign law was evaluated")
        st = self.state.get(cid)
        if st is None:
            self.flag("state_custody", i, f"evaluation at unknown controller {cid}")
            return
        kind = event.functor
        msg = event.args[1] if len(event.args) >= 2 else None
        if kind == "arrived":
            self._arrived(i, cid, name, event, msg, ops, deltas, st)
        elif kind == "sent":
            self._sent(i, cid, name, event, msg, ops, deltas, st)
        for d in _items(deltas):
            if _is(d, "add", 1):
                st.add(d.args[0])
            elif _is(d, "remove", 1):
                st.remove(d.args[0])

    def _sent(self, i, cid, name, event, msg, ops, deltas, st):
        is_mgr = st.has(Term("role", (Term("manager"),)))
        self.manager_at_eval[i] = is_mgr
        if isinstance(msg, Term) and msg.functor in PROFILE_EDITS:
            controlled = self.law_of(cid)["controlled"]
            for d in _items(deltas):
                if d.args and functor_name(d.args[0]) in controlled:
                    self.flag("controlled_protection", i, f"{name} changed controlled {to_text(d.args[0])}")
        # attached profiles must be the sender's current groups
        own = _groups(st.terms.values())
        for f in _ops(ops, "forward"):
            carried = _profile_terms(f.args[1])
            if carried and _groups(carried) != own:
                self.flag("group_isolation", i, f"{name} attached a profile with foreign groups")
        if _is(msg, "publish", 1) and _is(msg.args[0], "post", 2):
            ptype = to_text(msg.args[0].args[0])
            creates = [r for r in _ops(ops, "release") if _is(r.args[1], "create", 1)]
            if ptype == MANAGEMENT and not is_mgr:
                if _items(ops) or _items(deltas):
                    self.flag("management_gating", i, f"non-manager {name} published a management post")
                return
            expected = set()
            groups = _groups(st.terms.values())
            for s in st.of("subscriber"):
                if to_text(s.args[0]) in groups:
                    expected.add(functor_name(s.args[1]))
            posts = [f for f in _ops(ops, "forward") if _is(f.args[1], "post", 4)]
            got = [functor_name(f.args[2]) for f in posts]
            if sorted(got) != sorted(expected):
                self.flag("fanout", i, f"publish by {name} forwarded to {sorted(got)}, expected {sorted(expected)}")
            for r in creates:
                post = r.args[1].args[0]
                if _is(post, "post", 4):
                    self.published[name].append(post.args[0])
            self.tally["publishes"] += 1
        elif _is(msg, "search", 4):
            qid, _, ttl, thr = msg.args
            self._query_forwards(i, cid, name, qid, ttl, thr, ops, exclude=())

    def _arrived(self, i, cid, name, event, msg, ops, deltas, st):
        src = functor_name(event.args[0])
        delivers = _ops(ops, "deliver")
        if _is(msg, "dm", 2) and delivers:
            carried = _groups(_profile_terms(msg))
            if not carried & _groups(st.terms.values()):
                self.flag("group_isolation", i, f"direct message {src}->{name} delivered without a shared group")
        if _is(msg, "post", 4) and to_text(msg.args[2]) == MANAGEMENT and delivers:
            origin = self._origin_eval(self.evals[i][3])
            author = functor_name(msg.args[1])
            if origin is None or self.evals[origin][1] != author or not self.manager_at_eval.get(origin, False):
                self.flag("management_gating", i, f"management post by {author} delivered to {name}")
        if _is(msg, "requestSubscribe", 1):
            profile = {to_text(t) for t in _profile_terms(msg)}
            filters = [to_text(f.args[0]) for f in st.of("filter") if len(f.args) == 1]
            if any(f in profile for f in filters):
                added = [d for d in _items(deltas)
                         if _is(d, "add", 1) and _is(d.args[0], "subscriber", 2)
                         and functor_name(d.args[0].args[1]) == src]
                allowed = [f for f in _ops(ops, "forward") if to_text(f.args[1]) == "subscribeAllowed"]
                if added or allowed:
                    self.flag("filter_soundness", i, f"{src} subscribed to {name} despite a matching filter")
        if _is(msg, "query", 6):
            qid, _, origin, ttl, thr, _hops = msg.args
            key = (cid, to_text(qid))
            fwd = [f for f in _ops(ops, "forward") if _is(f.args[1], "query", 6)]
            prev = self.best_ttl.get(key)
            if fwd and prev is not None and ttl <= prev:
                self.flag("search_bounds", i, f"{name} re-forwarded {to_text(qid)} without a larger ttl")
            self._query_forwards(i, cid, name, qid, ttl, thr, ops, exclude=(src, functor_name(origin)))

    def _query_forwards(self, i, cid, name, qid, ttl, thr, ops, exclude):
        fwd = [f for f in _ops(ops, "forward") if _is(f.args[1], "query", 6)]
        key = (cid, to_text(qid))
        if isinstance(ttl, int):
            self.best_ttl[key] = max(ttl, self.best_ttl.get(key, -1))
        if not fwd:
            return
        if not isinstance(ttl, int) or ttl <= 0:
            self.flag("search_bounds", i, f"{name} forwarded {to_text(qid)} with no ttl left")
        if isinstance(thr, int) and len(fwd) > thr:
            self.flag("search_bounds", i, f"{name} forwarded {to_text(qid)} to {len(fwd)} > {thr} neighbours")
        for f in fwd:
            if isinstance(ttl, int) and f.args[1].args[3] != ttl - 1:
                self.flag("search_bounds", i, f"{name} forwarded {to_text(qid)} without decrementing ttl")
            if functor_name(f.args[2]) in exclude or functor_name(f.args[2]) == name:
                self.flag("search_bounds", i, f"{name} sent {to_text(qid)} back to {functor_name(f.args[2])}")

    def _origin_eval(self, cause):
        """Index of the sending-side evaluation behind an arrival."""
        if _is(cause, "env", 1) and cause.args[0] in self.envs:
            origin = self.envs[cause.args[0]][1]
            return origin if origin in self.evals else None
        return None

    # --------------------------------------------------------- envelopes

    def on_env(self, i, eid, cause, src, dst, h, msg):
        self.envs[eid] = (i, cause, src, dst, h, msg)
        self.open_envs.add(eid)
        self.tally["envelopes"] += 1
        s = functor_name(src)
        if s in self.quit_at:
            self.flag("revocation", i, f"{s} sourced a forward after quitting")
        ev = self.evals.get(cause) if isinstance(cause, int) else None
        if ev is None:
            self.flag("dual_mediation", i, f"envelope {eid} has no originating evaluation")
            return
        cid, agent, _, _, ops, _ = ev
        want = Term("forward", (src, msg, dst))
        if agent != s or not any(to_text(f) == to_text(want) for f in _ops(ops, "forward")):
            self.flag("dual_mediation", i, f"envelope {eid} was not mandated by {s}'s controller")
        if self.cid_law.get(cid) != h:
            self.flag("trust", i, f"envelope {eid} stamped with a law other than its sender's")
        if _is(msg, "query", 6):
            self.query_forwards[to_text(msg.args[0])] += 1

    def _terminal(self, i, eid, outcome):
        if eid not in self.envs:
            self.flag("conservation", i, f"terminal for unknown envelope {eid}")
            return
        self.terminal[eid].append(i)
        if len(self.terminal[eid]) > 1:
            self.flag("conservation", i, f"envelope {eid} reached a second terminal")
        self.open_envs.discard(eid)
        self.tally[outcome] += 1

    def on_hop(self, i, eid):
        self.tally["hops"] += 1

    def on_drop(self, i, eid, reason):
        self._terminal(i, eid, "dropped")
        self.tally[f"dropped_{reason.replace(' ', '_')}"] += 1

    # --------------------------------------------------------- effects

    def _delivery(self, i, cause, agent, kind):
        name = functor_name(agent)
        if name in self.quit_at:
            self.flag("revocation", i, f"{name} received a {kind} after quitting")
        ev = self.evals.get(cause)
        if ev is None:
            self.flag("dual_mediation", i, f"{kind} without an evaluation")
            return
        cid, who, event, ecause, _, _ = ev
        if who != name:
            self.flag("dual_mediation", i, f"{kind} to {name} ruled by {who}'s controller")
        if event.functor != "arrived":
            return
        self.tally["actor_deliveries"] += 1
        if not _is(ecause, "env", 1) or ecause.args[0] not in self.envs:
            self.flag("dual_mediation", i, f"{kind} not backed by an envelope")
            return
        env = self.envs[ecause.args[0]]
        sender = self.evals.get(env[1])
        if sender is None or env[1] == cause:
            self.flag("dual_mediation", i, f"{kind} passed fewer than two evaluations")
            return
        if self.cid_law.get(sender[0]) != self.cid_law.get(cid):
            self.flag("trust", i, f"cross-law {kind} from {sender[1]} to {name}")

    def on_deliver(self, i, cause, agent, src, msg):
        self.tally["deliveries"] += 1
        self._delivery(i, cause, agent, "deliver")
        if _is(msg, "hit", 4):
            qid = to_text(msg.args[0])
            self.hit_deliveries[qid].append((i, functor_name(msg.args[1]), msg.args[3]))

    def on_queued(self, i, cause, agent, msg):
        self.tally["queued"] += 1
        self._delivery(i, cause, agent, "queued message")

    def on_undeliverable(self, i, cause, agent, src, msg):
        self.tally["undeliverable"] += 1

    def on_db(self, i, cause, agent, query, result):
        name = functor_name(agent)
        ev = self.evals.get(cause)
        want = to_text(Term("release", (agent, query, Term("db"))))
        if ev is None or ev[1] != name or not any(to_text(r) == want for r in _ops(ev[4], "release")):
            self.flag("db_isolation", i, f"database of {name} touched without a release")
        db = self.dbs[name]
        if _is(query, "create", 1) and _is(result, "created", 1):
            db[to_text(result.args[0])] = query.args[0]
        elif _is(query, "update", 1) and _is(result, "updated", 1):
            db[to_text(result.args[0])] = query.args[0]
        elif _is(query, "delete", 1) and _is(result, "deleted", 1):
            db.pop(to_text(result.args[0]), None)
        elif _is(query, "search", 4) and _is(result, "hits", 4):
            pred = query.args[1]
            ids = _items(result.args[3])
            for pid in ids:
                post = db.get(to_text(pid))
                if post is None or match_pattern(pred, post) is None:
                    self.flag("search_bounds", i, f"{name} reported {to_text(pid)} which does not match")
            self.search_replies[to_text(query.args[0])][name] = {to_text(p) for p in ids}

    def on_blacklisted(self, i, cid, fp):
        self.blacklist[functor_name(cid)].add(fp)

    def on_notice(self, i, nid, origin, target, fp):
        self.tally["notices"] += 1
        h = self.cid_law.get(functor_name(origin))
        if h is not None:
            self.community[h].add(fp)

    def on_quit(self, i, agent):
        self.quit_at[functor_name(agent)] = i
        self.tally["quits"] += 1

    def on_search(self, i, qid, agent, ttl, thr, pred):
        self.searches[to_text(qid)] = (i, functor_name(agent), ttl, thr, pred)
        self.pending_searches.append(to_text(qid))

    # --------------------------------------------------------- drains

    def on_drain(self, i, label):
        for eid in sorted(self.open_envs):
            self.flag("conservation", i, f"envelope {eid} still pending at drain")
        self._close_searches(i)
        self.tally["drains"] += 1

    def on_snapshot(self, i, cid, agent, alive, state, blacklist):
        cid = functor_name(cid)
        st = self.state.get(cid)
        if st is None:
            self.flag("state_custody", i, f"snapshot of unknown controller {cid}")
            return
        have = {to_text(t) for t in _items(state)}
        if have != st.texts():
            diff = sorted(have ^ st.texts())[:3]
            self.flag("state_custody", i, f"{cid} snapshot disagrees with replay: {diff}")
        bl = set(_items(blacklist))
        if bl != self.blacklist[cid]:
            self.flag("state_custody", i, f"{cid} blacklist disagrees with replay")
        if functor_name(alive) == "true":
            missing = self.community[self.cid_law.get(cid)] - bl
            if missing:
                self.flag("revocation", i, f"{cid} lacks {len(missing)} revoked fingerprint(s)")
        name = self.cid_agent.get(cid)
        ltp = st.of("lastTenPosts")
        if ltp:
            ids = [to_text(p) for p in _items(ltp[0].args[0])]
            want = [to_text(p) for p in reversed(self.published[name][-10:])]
            if len(ids) > 10 or ids != want:
                self.flag("last_ten", i, f"lastTenPosts of {name} is {ids}, expected {want}")
        elif self.published[name]:
            self.flag("last_ten", i, f"{name} published but holds no lastTenPosts")

    def _graph(self) -> dict:
        graph: dict[str, set] = {}
        for cid, st in self.state.items():
            me = self.cid_agent[cid]
            graph.setdefault(me, set())
            for t in st.of("subscriber"):
                other = functor_name(t.args[1])
                graph[me].add(other)
                graph.setdefault(other, set()).add(me)
            for t in st.of("subscribedTo"):
                other = functor_name(t.args[0])
                graph[me].add(other)
                graph.setdefault(other, set()).add(me)
        return graph

    def _close_searches(self, i):
        if not self.pending_searches:
            return
        graph = self._graph()
        for qid in self.pending_searches:
            start, origin, ttl, thr, _ = self.searches[qid]
            reach = bfs_oracle(graph, origin, ttl) if isinstance(ttl, int) else set()
            replies = self.search_replies.get(qid, {})
            for j, who, ids in self.hit_deliveries.get(qid, []):
                if _items(ids) and who not in reach:
                    self.flag("search_bounds", j, f"{who} answered {qid} from beyond ttl {ttl}")
                if {to_text(p) for p in _items(ids)} != replies.get(who, set()) and _items(ids):
                    self.flag("search_bounds", j, f"hit from {who} for {qid} differs from its database reply")
            if isinstance(ttl, int) and isinstance(thr, int):
                bound = sum(thr ** h for h in range(ttl + 1))
                if self.query_forwards[qid] > bound:
                    self.flag("search_bounds", start,
                              f"{qid} used {self.query_forwards[qid]} forwards, bound {bound}")
            self.tally["searches"] += 1
        self.pending_searches = []


def check_trace(trace, suite="all") -> Report:
    """Audit ``trace``; ``suite`` is ``"all"`` or an iterable of check names."""
    if suite == "all" or suite is None:
        names = CHECKS
    else:
        names = tuple(suite)
        unknown = [n for n in names if n not in CHECKS]
        if unknown:
            raise ValueError(f"unknown checks: {', '.join(unknown)}")
    audit = _Audit(trace)
    report = audit.run()
    report.results = {n: report.results[n] for n in names}
    return report
