"""Deterministic in-process network of controllers.

Envelopes wait in FIFO queues, one per ordered (sender, receiver) pair.
``deliver_next`` picks one non-empty queue with the seeded RNG and moves its
head, so a run is a pure function of its inputs and seed.
"""

from __future__ import annotations

import bisect
import logging
import random
import socket
from collections import deque
from dataclasses import dataclass

from ..controller import (
    AdoptionRefused,
    Controller,
    Envelope,
    Host,
    adopt,
    on_actor_send,
    on_network_arrival,
)
from ..law import Law, Ruling, Event
from ..support import Certificate, CertificateAuthority, ControllerPool, NameRegistry, NameNotFound
from ..terms import Term, atom, mklist
from .trace import Trace

log = logging.getLogger(__name__)

NONE = atom("none")


class ScenarioError(Exception):
    pass


@dataclass(frozen=True)
class Notice:
    """Blacklist broadcast from one controller to another."""

    nid: int
    origin: str
    target: str
    fingerprint: str


def _term(x):
    if x is None:
        return NONE
    if isinstance(x, bool):
        return atom("true" if x else "false")
    if isinstance(x, tuple) and len(x) == 2 and x[0] == "env":
        return Term("env", (x[1],))
    return x


class Network(Host):
    def __init__(
        self,
        seed: int = 0,
        ca_key: str = "community-ca-key",
        pool_capacity: int = 256,
        domains=("db://be.example/",),
        transport: str = "sim",
        trace: Trace | None = None,
    ):
        if transport not in ("sim", "socket"):
            raise ValueError(f"unknown transport {transport!r}")
        self.seed = seed
        self.rng = random.Random(seed)
        self.trace = trace if trace is not None else Trace()
        self.ca_key = ca_key
        self.ca = CertificateAuthority(ca_key)
        self.registry = NameRegistry()
        self.pool = ControllerPool(pool_capacity)
        self.domains = tuple(domains)
        self.transport = transport
        self.laws: dict[str, Law] = {}
        self.controllers: dict[str, Controller] = {}
        self.by_name: dict[str, Controller] = {}
        self.certs: dict[str, Certificate] = {}
        self.queues: dict[tuple, deque] = {}
        self.ready: list[tuple] = []
        self._eid = 0
        self._nid = 0
        self._qid = 0
        self._sock: tuple[socket.socket, socket.socket] | None = None

    # ------------------------------------------------------------ bootstrap

    def add_law(self, alias: str, law: Law) -> None:
        self.laws[alias] = law
        self.trace.append(
            "law", atom(alias), atom(law.name), law.hash,
            mklist(atom(f) for f in sorted(law.controlled)),
            mklist(atom(f) for f in sorted(law.internal)),
            mklist(atom(f) for f in sorted(law.single)),
        )

    def boot_record(self) -> None:
        self.trace.append("boot", Term("seed", (self.seed,)), Term("pool", (self.pool.capacity,)),
                          Term("transport", (atom(self.transport),)),
                          mklist(self.domains))

    # ------------------------------------------------------------ Host

    def record_eval(self, c: Controller, event: Event, ruling: Ruling, cause=None):
        return self.trace.append(
            "eval", atom(c.cid), c.agent, event.to_term(), _term(cause),
            mklist(op.to_term() for op in ruling.ops),
            mklist(d.to_term() for d in ruling.deltas),
            atom(ruling.rule) if ruling.rule else NONE,
            ruling.diagnostic if ruling.diagnostic else NONE,
        )

    def record(self, kind: str, *args) -> None:
        self.trace.append(kind, *(_term(a) for a in args))

    def new_envelope(self, env: Envelope, cause) -> Envelope:
        self._eid += 1
        env = Envelope(env.src, env.dst, env.msg, env.law_hash, env.profile, self._eid)
        self.trace.append("env", env.eid, _term(cause), env.src, env.dst, env.law_hash, env.msg)
        self._enqueue(("env", env.src.functor, env.dst.functor), env)
        return env

    def broadcast_blacklist(self, origin: Controller, fingerprint: str) -> None:
        self.pool.community_blacklist(origin.law.hash).add(fingerprint)
        for name in self.registry.live_names():
            c = self.by_name.get(name)
            if c is None or c is origin or not c.alive or c.law.hash != origin.law.hash:
                continue
            self._nid += 1
            n = Notice(self._nid, origin.cid, c.cid, fingerprint)
            self.trace.append("notice", n.nid, atom(n.origin), atom(n.target), fingerprint)
            self._enqueue(("notice", origin.cid, c.cid), n)

    def deregister(self, name: str) -> None:
        self.registry.deregister(name)
        self.trace.append("deregister", atom(name))

    # ------------------------------------------------------------ scheduler

    def _enqueue(self, key: tuple, item) -> None:
        q = self.queues.get(key)
        if q is None:
            q = self.queues[key] = deque()
        if not q:
            bisect.insort(self.ready, key)
        q.append(item)

    @property
    def pending(self) -> int:
        return sum(len(q) for q in self.queues.values())

    def deliver_next(self) -> bool:
        """Move one queued item to its destination; False when nothing is pending."""
        if not self.ready:
            return False
        key = self.ready[self.rng.randrange(len(self.ready))]
        q = self.queues[key]
        item = q.popleft()
        if not q:
            self.ready.remove(key)
        if isinstance(item, Notice):
            self.trace.append("notice_hop", item.nid)
            target = self.controllers[item.target]
            if target.alive:
                target.add_to_blacklist(item.fingerprint)
            return True
        self.trace.append("hop", item.eid)
        env = self._transport(item)
        c = self.by_name.get(env.dst.functor)
        if c is None:
            self.trace.append("drop", env.eid, "unknown destination")
        else:
            on_network_arrival(c, env)
        return True

    def _transport(self, env: Envelope) -> Envelope:
        if self.transport == "sim":
            return env
        if self._sock is None:
            self._sock = socket.socketpair()
        a, b = self._sock
        data = env.encode()
        a.sendall(data)
        buf = b""
        while len(buf) < len(data):
            buf += b.recv(len(data) - len(buf))
        return Envelope.decode(buf, env.eid)

    def drain(self, label=None) -> None:
        while self.deliver_next():
            pass
        self.trace.append("drain", label if label is not None else NONE)
        for cid in sorted(self.controllers, key=lambda s: int(s[1:])):
            c = self.controllers[cid]
            self.trace.append(
                "snapshot", atom(cid), _term(c.agent), _term(c.alive),
                c.state.to_term() if c.state is not None else mklist(()),
                mklist(sorted(c.blacklist)),
            )

    def close(self) -> None:
        if self._sock is not None:
            for s in self._sock:
                s.close()
            self._sock = None

    # ------------------------------------------------------------ actions

    def controller(self, name: str) -> Controller:
        try:
            return self.by_name[name]
        except KeyError:
            raise ScenarioError(f"unknown agent {name!r}") from None

    def law(self, alias: str) -> Law:
        try:
            return self.laws[alias]
        except KeyError:
            raise ScenarioError(f"unknown law {alias!r}") from None

    def adopt(self, requested: str, attributes, law: str = "be", db: str | None = None) -> Controller:
        """Negotiate a name, obtain a certificate and adopt a fresh controller."""
        the_law = self.law(law)
        name = self.registry.register_name(requested)
        cert = self.ca.issue(name, attributes)
        self.certs[name] = cert
        return self._adopt_with(cert, the_law, db if db is not None else self.domains[0] + name)

    def _adopt_with(self, cert: Certificate, law: Law, db: str) -> Controller:
        c = self.pool.allocate(host=self)
        self.controllers[c.cid] = c
        try:
            adopt(c, law, cert, self.ca_key, db, self.domains, self.registry)
        except AdoptionRefused:
            self.pool.release(c.cid)
            self.controllers.pop(c.cid, None)
            raise
        self.by_name[c.name] = c
        return c

    def readopt(self, name: str, law: str | None = None) -> Controller:
        """Try to rejoin with the certificate ``name`` was first issued."""
        cert = self.certs.get(name)
        if cert is None:
            raise ScenarioError(f"no certificate on record for {name!r}")
        the_law = self.law(law) if law else self.controller(name).law
        return self._adopt_with(cert, the_law, self.domains[0] + name)

    def certify(self, name: str, attributes) -> list:
        cert = self.ca.issue(name, attributes)
        return self.controller(name).certify(cert, self.ca_key)

    def send(self, name: str, target, msg) -> list:
        target = atom(target) if isinstance(target, str) else target
        return on_actor_send(self.controller(name), target, msg)

    def new_qid(self) -> Term:
        self._qid += 1
        return atom(f"q{self._qid}")

    def resolve(self, name: str) -> str | None:
        try:
            return self.registry.resolve(name)
        except NameNotFound:
            return None

    def live(self) -> list[Controller]:
        return [self.by_name[n] for n in self.registry.live_names() if n in self.by_name]
