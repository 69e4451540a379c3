"""The generic controller: one agent's mediator under one law.

A controller processes interactive events strictly one at a time. Every
event goes through :func:`lgiosc.law.evaluate`; the controller only carries
out what the ruling mandates. Side effects that leave the controller
(envelopes, blacklist broadcasts, trace records) go through its ``host``,
which the simulated network supplies.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

from .law import (
    Deliver,
    Event,
    Forward,
    Inform,
    Law,
    ControlState,
    Quit,
    Release,
    Ruling,
    evaluate,
)
from .member import MemberDatabase, check_address, handle_release
from .support import Certificate, verify_certificate
from .terms import LIST, Term, TermError, atom, is_atom, mklist, parse_term, to_text

log = logging.getLogger(__name__)

BLACKLIST_MSG = atom("certificateBlacklist")
ALL_CONTROLLERS = atom("allControllers")
DB = atom("db")


class AdoptionRefused(Exception):
    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(reason)


class MalformedEnvelope(ValueError):
    pass


# ---------------------------------------------------------------- envelopes


@dataclass(frozen=True)
class Envelope:
    src: Term
    dst: Term
    msg: object
    law_hash: str
    profile: tuple | None = None
    eid: int = field(default=0, compare=False)

    def to_term(self) -> Term:
        args = [self.src, self.dst, self.law_hash, self.msg]
        if self.profile is not None:
            args.append(Term("profile", (mklist(self.profile),)))
        return Term("env", tuple(args))

    def encode(self) -> bytes:
        """Netstring framing of the canonical term: ``<len>:<text>,``."""
        payload = to_text(self.to_term()).encode("utf-8")
        return str(len(payload)).encode() + b":" + payload + b","

    @classmethod
    def decode(cls, data: bytes, eid: int = 0) -> "Envelope":
        env, rest = cls.read_frame(data, eid)
        if rest:
            raise MalformedEnvelope("trailing bytes after envelope frame")
        return env

    @classmethod
    def read_frame(cls, data: bytes, eid: int = 0) -> tuple["Envelope", bytes]:
        head, sep, rest = data.partition(b":")
        if not sep or not head.isdigit() or len(head) > 10:
            raise MalformedEnvelope("bad length prefix")
        n = int(head)
        if len(rest) < n + 1 or rest[n:n + 1] != b",":
            raise MalformedEnvelope("truncated envelope frame")
        try:
            t = parse_term(rest[:n].decode("utf-8"))
        except (TermError, UnicodeDecodeError) as exc:
            raise MalformedEnvelope(str(exc)) from exc
        return cls.from_term(t, eid), rest[n + 1:]

    @classmethod
    def from_term(cls, t, eid: int = 0) -> "Envelope":
        if not (isinstance(t, Term) and t.functor == "env" and t.arity in (4, 5)):
            raise MalformedEnvelope("not an envelope term")
        src, dst, law_hash, msg = t.args[:4]
        if not (is_atom(src) and is_atom(dst) and isinstance(law_hash, str)):
            raise MalformedEnvelope("bad envelope header")
        profile = None
        if t.arity == 5:
            p = t.args[4]
            if not (isinstance(p, Term) and p.functor == "profile" and p.arity == 1
                    and isinstance(p.args[0], Term) and p.args[0].functor == LIST):
                raise MalformedEnvelope("bad profile field")
            profile = p.args[0].args
        return cls(src, dst, msg, law_hash, profile, eid)


def attached_profile(msg) -> tuple | None:
    """The profile list carried inside a message term, if the law attached one."""
    if isinstance(msg, Term):
        for a in msg.args:
            if isinstance(a, Term) and a.functor == "profile" and a.arity == 1:
                inner = a.args[0]
                if isinstance(inner, Term) and inner.functor == LIST:
                    return inner.args
    return None


# ---------------------------------------------------------------- host


class Host:
    """Where a controller's outward effects go. This one discards them."""

    def record_eval(self, c: "Controller", event: Event, ruling: Ruling, cause=None):
        return None

    def record(self, kind: str, *args) -> None:
        pass

    def new_envelope(self, env: Envelope, cause) -> Envelope:
        return env

    def broadcast_blacklist(self, origin: "Controller", fingerprint: str) -> None:
        pass

    def deregister(self, name: str) -> None:
        pass


NULL_HOST = Host()


# ---------------------------------------------------------------- controller


class Controller:
    def __init__(self, cid: str, host: Host | None = None, pool=None):
        self.cid = cid
        self.host = host or NULL_HOST
        self.pool = pool
        self.agent: Term | None = None
        self.law: Law | None = None
        self.state: ControlState | None = None
        self.db: MemberDatabase | None = None
        self.certificate: Certificate | None = None
        self.inbox: deque = deque()
        self.alive = False
        self.attached = True
        self.blacklist: set[str] = set()
        self.offline: list = []
        self.delivered: list = []
        self.last_ruling: Ruling | None = None

    def __repr__(self):
        who = to_text(self.agent) if self.agent is not None else "-"
        return f"<Controller {self.cid} agent={who} alive={self.alive}>"

    @property
    def name(self) -> str | None:
        return None if self.agent is None else self.agent.functor

    # --- admission

    def admits(self, cert: Certificate, ca_key) -> str | None:
        """Reason this controller would refuse ``cert``, or None."""
        if not verify_certificate(cert, ca_key):
            return "invalid certificate signature"
        if cert.fingerprint in self.blacklist:
            return "certificate blacklisted"
        return None

    # --- event processing

    def _fire(self, event: Event, cause=None) -> tuple[Ruling, list]:
        ruling = evaluate(self.law, event, self.state)
        eval_id = self.host.record_eval(self, event, ruling, cause)
        envs = self._execute(ruling, eval_id)
        return ruling, envs

    def _drain_local(self, envs: list) -> list:
        while self.inbox and self.alive:
            event, cause = self.inbox.popleft()
            _, more = self._fire(event, cause)
            envs.extend(more)
        return envs

    def _execute(self, ruling: Ruling, eval_id) -> list:
        self.state = ruling.state
        envs = []
        for op in ruling.ops:
            if not self.alive:
                break
            if isinstance(op, Forward):
                if op.src != self.agent or not is_atom(op.dst):
                    self.host.record("diagnostic", eval_id, "forward with foreign source or bad target")
                    continue
                env = Envelope(self.agent, op.dst, op.msg, self.law.hash, attached_profile(op.msg))
                envs.append(self.host.new_envelope(env, eval_id))
            elif isinstance(op, Deliver):
                if op.dst != self.agent:
                    self.host.record("diagnostic", eval_id, "deliver to a foreign actor")
                    continue
                self._deliver(op.src, op.msg, eval_id)
            elif isinstance(op, Release):
                if op.src != self.agent:
                    self.host.record("diagnostic", eval_id, "release for a foreign agent")
                    continue
                result = handle_release(self.db, op.msg)
                self.host.record("db", eval_id, self.agent, op.msg, result)
                self.inbox.append((Event("submitted", op.resource, self.agent, result), eval_id))
            elif isinstance(op, Inform):
                self._inform(op, eval_id)
            elif isinstance(op, Quit):
                execute_quit(self)
        return envs

    def _deliver(self, src, msg, cause) -> None:
        if self.attached:
            self.delivered.append((src, msg))
            self.host.record("deliver", cause, self.agent, src, msg)
        else:
            self.host.record("undeliverable", cause, self.agent, src, msg)

    def _inform(self, op: Inform, cause) -> None:
        if op.msg == BLACKLIST_MSG and op.audience == ALL_CONTROLLERS:
            if self.certificate is not None:
                fp = self.certificate.fingerprint
                self.add_to_blacklist(fp)
                self.host.broadcast_blacklist(self, fp)
        elif op.audience == self.agent:
            if not self.attached:
                self.offline.append(op.msg)
                self.host.record("queued", cause, self.agent, op.msg)
        else:
            self.host.record("diagnostic", cause, "inform to an unknown audience")

    def add_to_blacklist(self, fingerprint: str) -> None:
        if fingerprint not in self.blacklist:
            self.blacklist.add(fingerprint)
            self.host.record("blacklisted", atom(self.cid), fingerprint)

    # --- actor-facing API

    def send(self, target, msg) -> list:
        return on_actor_send(self, target, msg)

    def certify(self, cert: Certificate, ca_key) -> list:
        if not self.alive:
            self.host.record("refused", self.agent, Term("certify", (cert.to_term(),)))
            return []
        reason = self.admits(cert, ca_key)
        if reason is None and cert.subject != self.name:
            reason = "certificate subject mismatch"
        if reason is not None:
            self.host.record("refused", self.agent, Term("certify", (cert.to_term(),)), reason)
            return []
        ruling, envs = self._fire(Event("certified", self.agent, self.agent, cert.to_term()))
        self.last_ruling = ruling
        return self._drain_local(envs)

    def detach(self) -> None:
        self.attached = False
        self.host.record("detach", self.agent)

    def attach(self) -> None:
        self.attached = True
        self.host.record("attach", self.agent)
        queued, self.offline = self.offline, []
        for msg in queued:
            self.delivered.append((self.agent, msg))
            self.host.record("flush", self.agent, msg)

    def profile(self) -> list:
        return self.law.profile(self.state) if self.law else []


def adopt(
    controller: Controller,
    law: Law | None,
    cert: Certificate,
    ca_key,
    db_address: str | None = None,
    allowed_domains=("db://",),
    registry=None,
) -> Controller:
    """Adopt ``controller`` for the actor named by ``cert.subject``.

    Raises AdoptionRefused when the law is missing, the certificate fails
    verification or is blacklisted, the database lies outside the allowed
    domain, the name is unavailable, or the law itself refuses (quits).
    """
    if law is None:
        raise AdoptionRefused("no law loaded")
    if controller.law is not None:
        raise AdoptionRefused("controller already adopted")
    if controller.pool is not None:
        for fp in sorted(controller.pool.community_blacklist(law.hash)):
            controller.add_to_blacklist(fp)
    reason = controller.admits(cert, ca_key)
    if reason is None and db_address is not None:
        try:
            check_address(db_address, allowed_domains)
        except ValueError as exc:
            reason = str(exc)
    if reason is None and registry is not None and not registry.is_free(cert.subject):
        reason = f"name {cert.subject} is not reserved for this actor"
    if reason is not None:
        controller.host.record("adopt_refused", atom(controller.cid), atom(cert.subject), cert.fingerprint, reason)
        raise AdoptionRefused(reason)

    controller.agent = atom(cert.subject)
    controller.law = law
    controller.state = ControlState.for_law(law)
    controller.certificate = cert
    controller.alive = True
    controller.db = MemberDatabase(db_address) if db_address is not None else None
    controller.host.record("adopt", atom(controller.cid), controller.agent, law.hash, cert.fingerprint)

    ruling, envs = controller._fire(Event("adopted", controller.agent, controller.agent, cert.to_term()))
    controller.last_ruling = ruling
    if not controller.alive:
        controller.host.record("adopt_refused", atom(controller.cid), controller.agent, cert.fingerprint, "refused by law")
        raise AdoptionRefused("refused by law")
    if registry is not None:
        registry.bind(cert.subject, controller.cid)
    controller._drain_local(envs)
    return controller


def on_actor_send(c: Controller, target, msg) -> list:
    """The actor asks its controller to send ``msg`` to ``target``."""
    target = atom(target) if isinstance(target, str) else target
    if not c.alive:
        c.host.record("refused", c.agent, Term("send", (target, msg)))
        return []
    ruling, envs = c._fire(Event("sent", c.agent, target, msg))
    c.last_ruling = ruling
    return c._drain_local(envs)


def verify_peer(local: Controller, env: Envelope) -> bool:
    return local.law is not None and env.law_hash == local.law.hash


def on_network_arrival(c: Controller, env: Envelope) -> list:
    if not c.alive:
        c.host.record("drop", env.eid, "dead")
        return []
    if env.dst != c.agent:
        c.host.record("drop", env.eid, "misrouted")
        return []
    if not verify_peer(c, env):
        c.host.record("drop", env.eid, "trust")
        return []
    _, envs = c._fire(Event("arrived", env.src, env.dst, env.msg), ("env", env.eid))
    return c._drain_local(envs)


def broadcast_blacklist(origin: Controller, fingerprint: str) -> None:
    origin.add_to_blacklist(fingerprint)
    origin.host.broadcast_blacklist(origin, fingerprint)


def execute_quit(c: Controller) -> None:
    if not c.alive:
        return
    c.alive = False
    c.inbox.clear()
    c.offline.clear()
    c.host.record("quit", c.agent)
    if c.agent is not None:
        c.host.deregister(c.agent.functor)
