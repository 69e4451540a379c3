"""The actor-facing half of a member: profile helpers and the private database."""

from __future__ import annotations

from dataclasses import dataclass, field

from .law import AddState
from .terms import Term, TermError, atom, match_pattern, mklist, parse_term, to_text

CRUD = ("create", "read", "update", "delete")


class DatabaseError(ValueError):
    pass


@dataclass(frozen=True)
class Post:
    id: Term
    author: Term
    type: Term
    body: str
    seq: int

    @classmethod
    def from_term(cls, t) -> "Post":
        if not (isinstance(t, Term) and t.functor == "post" and t.arity == 4):
            raise DatabaseError(f"not a post: {to_text(t)}")
        pid, author, ptype, body = t.args
        if not (isinstance(pid, Term) and pid.functor == "id" and pid.arity == 2 and isinstance(pid.args[1], int)):
            raise DatabaseError(f"malformed post id: {to_text(pid)}")
        if not isinstance(ptype, Term) or ptype.args:
            raise DatabaseError("post type must be a tag")
        return cls(pid, author, ptype, body if isinstance(body, str) else to_text(body), pid.args[1])

    def to_term(self) -> Term:
        return Term("post", (self.id, self.author, self.type, self.body))


@dataclass(frozen=True)
class CrudQuery:
    verb: str
    payload: object

    def __post_init__(self):
        if self.verb not in CRUD:
            raise DatabaseError(f"verb must be one of {CRUD}, got {self.verb!r}")

    @classmethod
    def from_term(cls, t) -> "CrudQuery":
        if not (isinstance(t, Term) and isinstance(t.functor, str) and t.arity == 1):
            raise DatabaseError(f"not a query: {to_text(t)}")
        return cls(t.functor, t.args[0])


def check_address(address: str, allowed: tuple | list) -> None:
    if not any(address.startswith(prefix) for prefix in allowed):
        raise DatabaseError(f"database address {address!r} is outside the allowed domain")


@dataclass
class MemberDatabase:
    address: str
    records: dict = field(default_factory=dict)

    def _key(self, pid) -> str:
        return to_text(pid)

    def sorted_posts(self) -> list[Post]:
        return [self.records[k] for k in sorted(self.records)]

    def dump(self) -> str:
        return "".join(to_text(p.to_term()) + "\n" for p in self.sorted_posts())

    @classmethod
    def load(cls, address: str, text: str) -> "MemberDatabase":
        db = cls(address)
        for line in text.splitlines():
            line = line.strip()
            if line and not line.startswith("#"):
                post = Post.from_term(parse_term(line, allow_vars=False))
                db.records[db._key(post.id)] = post
        return db


def crud_execute(db: MemberDatabase, q: CrudQuery):
    """Run one CRUD query; returns the result term handed back to the controller."""
    p = q.payload
    if q.verb == "create":
        try:
            post = Post.from_term(p)
        except DatabaseError:
            return Term("invalid", (p,))
        key = db._key(post.id)
        if key in db.records:
            return Term("exists", (post.id,))
        db.records[key] = post
        return Term("created", (post.id,))
    if q.verb == "read":
        if isinstance(p, Term) and p.functor == "post" and p.arity == 4:
            found = [r.to_term() for r in db.sorted_posts() if match_pattern(p, r.to_term()) is not None]
        else:
            hit = db.records.get(db._key(p))
            found = [hit.to_term()] if hit else []
        return Term("records", (mklist(found),))
    if q.verb == "update":
        try:
            post = Post.from_term(p)
        except DatabaseError:
            return Term("invalid", (p,))
        key = db._key(post.id)
        if key not in db.records:
            return Term("notFound", (post.id,))
        db.records[key] = post
        return Term("updated", (post.id,))
    key = db._key(p)
    if key not in db.records:
        return Term("notFound", (p,))
    del db.records[key]
    return Term("deleted", (p,))


def search_records(db: MemberDatabase, predicate) -> list:
    """Ids of posts whose term matches ``predicate``, in canonical order."""
    return [r.id for r in db.sorted_posts() if match_pattern(predicate, r.to_term()) is not None]


def handle_release(db: MemberDatabase | None, query):
    """Dispatch a released query to the database and build the reply term."""
    if db is None:
        return Term("noDatabase", (query,))
    if isinstance(query, Term) and query.functor == "search" and query.arity == 4:
        qid, pred, origin, hops = query.args
        return Term("hits", (qid, origin, hops, mklist(search_records(db, pred))))
    try:
        return crud_execute(db, CrudQuery.from_term(query))
    except (DatabaseError, TermError):
        return Term("invalid", (query,))


# ---------------------------------------------------------------- profile API
# These go through the controller like any other actor send: the law decides.


def add_profile_attribute(c, attr) -> bool:
    c.send(c.agent, Term("addProfile", (attr,)))
    return any(isinstance(d, AddState) for d in c.last_ruling.deltas)


def update_profile_attribute(c, attr) -> bool:
    c.send(c.agent, Term("updateProfile", (attr,)))
    return any(isinstance(d, AddState) for d in c.last_ruling.deltas)


def add_filter(c, attr) -> None:
    c.send(c.agent, Term("addFilter", (attr,)))


def profile_of(c) -> list:
    return c.law.profile(c.state) if c.law else []


def db_message(query) -> Term:
    return Term("#db#", (query,))


def publish_message(post_type: str, body: str) -> Term:
    if not (post_type.startswith("#") and post_type.endswith("#")):
        post_type = f"#{post_type}#"
    return Term("publish", (Term("post", (atom(post_type), body)),))

