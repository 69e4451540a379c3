"""Community support: certification authority, naming secretary, controller pool."""

from __future__ import annotations

import hashlib
import hmac
import re
from dataclasses import dataclass, field

from .terms import Term, atom, mklist, sort_key, to_text


class SupportError(Exception):
    pass


class PoolExhausted(SupportError):
    pass


class NameNotFound(SupportError, KeyError):
    pass


# ---------------------------------------------------------------- CA


@dataclass(frozen=True)
class Certificate:
    issuer: str
    subject: str
    attributes: tuple
    fingerprint: str
    signature: str

    def content(self) -> Term:
        return cert_content(self.issuer, self.subject, self.attributes)

    def to_term(self) -> Term:
        return self.content()


def cert_content(issuer: str, subject: str, attributes) -> Term:
    attrs = sorted(set(attributes), key=sort_key)
    return Term("cert", (
        Term("issuer", (atom(issuer),)),
        Term("subj", (atom(subject),)),
        Term("attr", (mklist(attrs),)),
    ))


def _digest(content: Term) -> str:
    return hashlib.sha256(to_text(content).encode()).hexdigest()


def _mac(key: bytes, content: Term) -> str:
    return hmac.new(key, to_text(content).encode(), hashlib.sha256).hexdigest()


class CertificateAuthority:
    """Issues MAC-signed attribute certificates. Controllers share the key."""

    def __init__(self, key: bytes | str, name: str = "ca"):
        self.key = key.encode() if isinstance(key, str) else key
        self.name = name

    def issue(self, subject: str, attributes) -> Certificate:
        attrs = tuple(sorted(set(attributes), key=sort_key))
        if not attrs:
            raise SupportError("a certificate needs at least one attribute")
        content = cert_content(self.name, subject, attrs)
        return Certificate(self.name, subject, attrs, _digest(content), _mac(self.key, content))

    def verify(self, cert: Certificate) -> bool:
        return verify_certificate(cert, self.key, self.name)


def issue_certificate(ca_key, subject: str, attributes, issuer: str = "ca") -> Certificate:
    return CertificateAuthority(ca_key, issuer).issue(subject, attributes)


def verify_certificate(cert: Certificate, key: bytes | str, issuer: str = "ca") -> bool:
    key = key.encode() if isinstance(key, str) else key
    if cert.issuer != issuer:
        return False
    content = cert.content()
    return hmac.compare_digest(cert.fingerprint, _digest(content)) and hmac.compare_digest(
        cert.signature, _mac(key, content)
    )


# ---------------------------------------------------------------- secretary

_NAME_OK = re.compile(r"[a-z][a-z0-9_]*\Z")


def normalize_name(requested: str) -> str:
    name = re.sub(r"[^a-z0-9_]", "_", requested.strip().lower())
    if not name or not name[0].isalpha():
        name = "a" + name
    return name


class NameRegistry:
    """Naming and locating service.

    A name, once handed out, stays reserved for the whole run even after its
    agent quits; a colliding request is negotiated to ``name-2``, ``name-3``...
    """

    def __init__(self):
        self.entries: dict[str, str | None] = {}
        self.liveness: dict[str, bool] = {}

    def register_name(self, requested: str) -> str:
        base = normalize_name(requested)
        name, n = base, 1
        while name in self.entries:
            n += 1
            name = f"{base}-{n}"
        self.entries[name] = None
        self.liveness[name] = False
        return name

    def bind(self, name: str, locator: str) -> None:
        if name not in self.entries:
            raise NameNotFound(name)
        if self.entries[name] is not None:
            raise SupportError(f"name {name} is already bound")
        self.entries[name] = locator
        self.liveness[name] = True

    def deregister(self, name: str) -> None:
        if name in self.liveness:
            self.liveness[name] = False

    def resolve(self, name: str) -> str:
        loc = self.entries.get(name)
        if loc is None or not self.liveness.get(name):
            raise NameNotFound(name)
        return loc

    def is_free(self, name: str) -> bool:
        """True when ``name`` is reserved but not yet bound to a controller."""
        return name in self.entries and self.entries[name] is None

    def live_names(self) -> list[str]:
        return sorted(n for n, up in self.liveness.items() if up)

    def dump(self) -> str:
        lines = []
        for name in sorted(self.entries):
            loc = self.entries[name] or "-"
            state = "live" if self.liveness[name] else "down"
            lines.append(f"{name}\t{loc}\t{state}")
        return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------- controller pool


@dataclass
class ControllerPool:
    """A controller service hosting up to ``capacity`` generic controllers.

    ``blacklists`` holds, per law hash, every fingerprint broadcast to the
    community so far; controllers adopted later start from it.
    """

    capacity: int
    allocated: set = field(default_factory=set)
    blacklists: dict = field(default_factory=dict)
    _next: int = 0

    def allocate(self, host=None):
        from .controller import Controller

        if len(self.allocated) >= self.capacity:
            raise PoolExhausted(f"controller pool exhausted (capacity {self.capacity})")
        self._next += 1
        cid = f"c{self._next}"
        self.allocated.add(cid)
        return Controller(cid, host=host, pool=self)

    def release(self, cid: str) -> None:
        self.allocated.discard(cid)

    def community_blacklist(self, law_hash: str) -> set:
        return self.blacklists.setdefault(law_hash, set())


def allocate_controller(pool: ControllerPool, host=None):
    return pool.allocate(host)
