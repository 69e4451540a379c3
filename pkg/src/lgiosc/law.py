"""The law language and its evaluator.

A law file is a list of declarations followed by labelled rules::

    law be.
    controlled role, group.
    single lastTenPosts.
    internal subscriber.

    revoke_sent: UPON sent(X, #revoke#, Y) {
        if role(manager)@CS then { forward } else { deliver(X, notAllow, X) }
    }

``evaluate`` maps one (event, control state) pair to a :class:`Ruling`. The
first rule whose event pattern matches and whose head guards succeed decides
the ruling; when no rule applies the ruling is empty and the state unchanged.
The full grammar is in ``docs/law-language.md``.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from typing import Iterator, Optional

from .terms import (
    LIST,
    ListPattern,
    Term,
    TermError,
    TokenStream,
    Var,
    check_depth,
    functor_name,
    match_pattern,
    mklist,
    sort_key,
    substitute,
    to_text,
    tokenize,
    variables,
)

log = logging.getLogger(__name__)

STEP_BUDGET = 10_000
EVENT_KINDS = ("adopted", "certified", "sent", "arrived", "submitted")


class LawSyntaxError(TermError):
    pass


class StepBudgetExceeded(Exception):
    pass


# ---------------------------------------------------------------- events and ops


@dataclass(frozen=True)
class Event:
    kind: str
    source: Term
    target: Term
    payload: object

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")

    def to_term(self) -> Term:
        if self.kind in ("adopted", "certified"):
            return Term(self.kind, (self.source, self.payload))
        return Term(self.kind, (self.source, self.payload, self.target))


@dataclass(frozen=True)
class Forward:
    src: object
    msg: object
    dst: object

    def to_term(self):
        return Term("forward", (self.src, self.msg, self.dst))


@dataclass(frozen=True)
class Deliver:
    src: object
    msg: object
    dst: object

    def to_term(self):
        return Term("deliver", (self.src, self.msg, self.dst))


@dataclass(frozen=True)
class Release:
    src: object
    msg: object
    resource: object

    def to_term(self):
        return Term("release", (self.src, self.msg, self.resource))


@dataclass(frozen=True)
class Inform:
    msg: object
    audience: object

    def to_term(self):
        return Term("inform", (self.msg, self.audience))


@dataclass(frozen=True)
class Quit:
    def to_term(self):
        return Term("quit")


@dataclass(frozen=True)
class AddState:
    term: object

    def to_term(self):
        return Term("add", (self.term,))


@dataclass(frozen=True)
class RemoveState:
    """Removes every attribute matching ``term`` (``_`` is a wildcard)."""

    term: object

    def to_term(self):
        return Term("remove", (self.term,))


RulingOp = Forward | Deliver | Release | Inform | Quit | AddState | RemoveState


def op_from_term(t: Term):
    f, a = t.functor, t.args
    if f == "forward":
        return Forward(*a)
    if f == "deliver":
        return Deliver(*a)
    if f == "release":
        return Release(*a)
    if f == "inform":
        return Inform(*a)
    if f == "quit":
        return Quit()
    if f == "add":
        return AddState(a[0])
    if f == "remove":
        return RemoveState(a[0])
    raise ValueError(f"not a ruling op: {to_text(t)}")


# ---------------------------------------------------------------- control state


class ControlState:
    """Immutable set of attribute terms, bucketed by functor.

    ``single`` names functors that may occur at most once; adding one
    replaces the previous value. ``controlled`` is the law's list of
    controlled functors, used to compute :attr:`controlled_marks`.
    """

    __slots__ = ("_buckets", "single", "controlled", "_sorted")

    def __init__(self, attributes=(), single=frozenset(), controlled=frozenset()):
        self.single = frozenset(single)
        self.controlled = frozenset(controlled)
        self._buckets: dict[str, frozenset] = {}
        self._sorted: dict[str, tuple] = {}
        for t in attributes:
            self._put(t)

    @classmethod
    def for_law(cls, law: "Law", attributes=()) -> "ControlState":
        return cls(attributes, law.single, law.controlled)

    def _put(self, t):
        f = functor_name(t)
        if f is None:
            raise TermError(f"attribute must be a compound or atom: {to_text(t)}")
        if f in self.single:
            self._buckets[f] = frozenset([t])
        else:
            self._buckets[f] = self._buckets.get(f, frozenset()) | {t}
        self._sorted.pop(f, None)

    def _copy(self) -> "ControlState":
        new = ControlState.__new__(ControlState)
        new.single, new.controlled = self.single, self.controlled
        new._buckets = dict(self._buckets)
        new._sorted = dict(self._sorted)
        return new

    def add(self, t) -> "ControlState":
        new = self._copy()
        new._put(t)
        return new

    def remove(self, pattern) -> "ControlState":
        f = functor_name(pattern)
        names = [f] if f is not None else list(self._buckets)
        new = self._copy()
        for name in names:
            bucket = new._buckets.get(name)
            if not bucket:
                continue
            keep = frozenset(t for t in bucket if match_pattern(pattern, t) is None)
            if keep != bucket:
                if keep:
                    new._buckets[name] = keep
                else:
                    del new._buckets[name]
                new._sorted.pop(name, None)
        return new

    def apply(self, delta) -> "ControlState":
        if isinstance(delta, AddState):
            return self.add(delta.term)
        if isinstance(delta, RemoveState):
            return self.remove(delta.term)
        raise TypeError(delta)

    def bucket(self, functor: str) -> tuple:
        cached = self._sorted.get(functor)
        if cached is None:
            cached = tuple(sorted(self._buckets.get(functor, ()), key=sort_key))
            self._sorted[functor] = cached
        return cached

    def functors(self) -> list[str]:
        return sorted(f for f, b in self._buckets.items() if b)

    @property
    def attributes(self) -> frozenset:
        out = frozenset()
        for b in self._buckets.values():
            out |= b
        return out

    @property
    def controlled_marks(self) -> frozenset:
        return frozenset(f for f in self.functors() if f in self.controlled)

    def sorted_terms(self) -> list:
        out = []
        for f in self.functors():
            out.extend(self.bucket(f))
        return out

    def __iter__(self):
        return iter(self.sorted_terms())

    def __len__(self):
        return sum(len(b) for b in self._buckets.values())

    def __contains__(self, t) -> bool:
        f = functor_name(t)
        return f is not None and t in self._buckets.get(f, ())

    def __eq__(self, other):
        if not isinstance(other, ControlState):
            return NotImplemented
        return self.attributes == other.attributes

    def __hash__(self):
        return hash(self.attributes)

    def to_term(self) -> Term:
        return mklist(self.sorted_terms())

    def __repr__(self):
        return f"ControlState({to_text(self.to_term())})"


# ---------------------------------------------------------------- AST


@dataclass(frozen=True)
class InState:
    pattern: object


@dataclass(frozen=True)
class InList:
    pattern: object
    source: object


@dataclass(frozen=True)
class Compare:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Not:
    guards: tuple


@dataclass(frozen=True)
class Or:
    branches: tuple


@dataclass(frozen=True)
class IsControlled:
    arg: object


@dataclass(frozen=True)
class Bind:
    var: Var
    expr: object


@dataclass(frozen=True)
class Add:
    term: object


@dataclass(frozen=True)
class Remove:
    term: object


@dataclass(frozen=True)
class OpStmt:
    name: str
    args: Optional[tuple]


@dataclass(frozen=True)
class If:
    guards: tuple
    then: tuple
    orelse: tuple = ()


@dataclass(frozen=True)
class ForAll:
    vars: tuple
    limit: object
    guards: tuple
    body: tuple


@dataclass(frozen=True)
class Return:
    pass


@dataclass(frozen=True)
class Rule:
    label: str
    pattern: Term
    guards: tuple
    body: tuple

    @property
    def kind(self) -> str:
        return self.pattern.functor


@dataclass(frozen=True)
class Law:
    name: str
    rules: tuple
    controlled: frozenset = frozenset()
    single: frozenset = frozenset()
    internal: frozenset = frozenset()
    hash: str = field(default="", compare=False)

    def __post_init__(self):
        if not self.hash:
            object.__setattr__(self, "hash", law_hash(self))

    def evaluate(self, event: Event, state: ControlState) -> "Ruling":
        return evaluate(self, event, state)

    def profile(self, state: ControlState) -> list:
        return [t for t in state.sorted_terms() if functor_name(t) not in self.internal]


# ---------------------------------------------------------------- parser

BUILTINS = {"plus": 2, "minus": 2, "take": 2, "length": 1, "profile": 0, "value": 2}
OPS = {"forward": (0, 3), "deliver": (0, 3), "release": (3,), "inform": (2,), "quit": (0,)}
COMPARISONS = ("==", "!=", "<", "<=", ">", ">=")
KEYWORDS = {"if", "then", "else", "forall", "limit", "return", "not", "in", "is"}


def _names(t) -> set[str]:
    return {v.name for v in variables(t) if not v.anonymous}


class _Parser(TokenStream):
    def kw(self, text: str) -> bool:
        tok = self.peek
        return tok.text == text and tok.kind in ("IDENT", "VAR", "OP")

    def accept_kw(self, text: str) -> bool:
        if self.kw(text):
            self.next()
            return True
        return False

    def expect_kw(self, text: str):
        if not self.accept_kw(text):
            self.error(f"expected {text!r}, found {self.peek.text or 'end of input'!r}")

    def error(self, message, tok=None):
        tok = tok or self.peek
        raise LawSyntaxError(message, tok.line, tok.col)

    def need_bound(self, t, bound: set, tok, allow_anonymous: bool = False):
        for v in variables(t):
            if v.anonymous:
                if not allow_anonymous:
                    self.error("anonymous variable in a constructed term", tok)
            elif v.name not in bound:
                self.error(f"unbound variable {v.name}", tok)

    def ident_list(self) -> list[str]:
        names = []
        while True:
            tok = self.next()
            if tok.kind not in ("IDENT", "TAG"):
                self.error("expected an attribute name", tok)
            names.append(tok.text)
            if not self.accept(","):
                break
        return names

    # --- top level

    def law(self) -> Law:
        name = "anonymous"
        controlled, single, internal = set(), set(), set()
        while self.peek.kind == "IDENT" and self.peek_at(1).text != ":":
            tok = self.next()
            if tok.text == "law":
                n = self.next()
                if n.kind != "IDENT":
                    self.error("expected a law name", n)
                name = n.text
            elif tok.text == "controlled":
                controlled.update(self.ident_list())
            elif tok.text == "single":
                single.update(self.ident_list())
            elif tok.text == "internal":
                internal.update(self.ident_list())
            else:
                self.error(f"unknown declaration {tok.text!r}", tok)
            self.expect(".")
        rules, labels = [], set()
        while self.peek.kind != "EOF":
            tok = self.peek
            rule = self.rule()
            if rule.label in labels:
                self.error(f"duplicate rule label {rule.label!r}", tok)
            labels.add(rule.label)
            rules.append(rule)
        return Law(name, tuple(rules), frozenset(controlled), frozenset(single), frozenset(internal))

    def rule(self) -> Rule:
        tok = self.next()
        if tok.kind != "IDENT":
            self.error("expected a rule label", tok)
        self.expect(":")
        self.expect_kw("UPON")
        ptok = self.peek
        pattern = self.term()
        if not isinstance(pattern, Term) or pattern.functor not in EVENT_KINDS:
            self.error(f"event pattern must be one of {', '.join(EVENT_KINDS)}", ptok)
        bound = _names(pattern)
        guards: tuple = ()
        if self.accept(":-"):
            guards, bound = self.guards(bound)
        body, _ = self.block(bound)
        return Rule(tok.text, pattern, guards, body)

    # --- guards

    def guards(self, bound: set) -> tuple[tuple, set]:
        out = []
        g, bound = self.guard(bound)
        out.append(g)
        while self.accept(","):
            g, bound = self.guard(bound)
            out.append(g)
        return tuple(out), bound

    def guard(self, bound: set):
        tok = self.peek
        if self.accept_kw("not"):
            g, _ = self.guard(set(bound))
            return Not((g,)), bound
        if self.accept("("):
            branches, results = [], []
            gs, b = self.guards(set(bound))
            branches.append(gs)
            results.append(b)
            while self.accept(";"):
                gs, b = self.guards(set(bound))
                branches.append(gs)
                results.append(b)
            self.expect(")")
            if len(branches) == 1:
                only = branches[0]
                return (only[0] if len(only) == 1 else Or((only,))), results[0]
            return Or(tuple(branches)), set.intersection(*results)
        left = self.term()
        if self.accept("@"):
            if self.kw("CS"):
                self.next()
                return InState(left), bound | _names(left)
            stok = self.peek
            src = self.term()
            self.need_bound(src, bound, stok)
            return InList(left, src), bound | _names(left)
        if self.accept_kw("in"):
            stok = self.peek
            src = self.term()
            self.need_bound(src, bound, stok)
            return InList(left, src), bound | _names(left)
        if self.accept_kw("is"):
            return self._bind(left, bound, tok)
        for op in COMPARISONS:
            if self.accept(op):
                rtok = self.peek
                right = self.term()
                self.need_bound(left, bound, tok)
                self.need_bound(right, bound, rtok)
                return Compare(op, left, right), bound
        if isinstance(left, Term) and left.functor == "controlled" and left.arity == 1:
            self.need_bound(left.args[0], bound, tok)
            return IsControlled(left.args[0]), bound
        self.error("expected a guard", tok)

    def _bind(self, left, bound: set, tok):
        if not isinstance(left, Var) or left.anonymous:
            self.error("left side of 'is' must be a named variable", tok)
        if left.name in bound:
            self.error(f"variable {left.name} is already bound", tok)
        etok = self.peek
        expr = self.term()
        self.need_bound(expr, bound, etok)
        self._check_builtins(expr, etok)
        return Bind(left, expr), bound | {left.name}

    def _check_builtins(self, expr, tok):
        if isinstance(expr, Term) and isinstance(expr.functor, str) and expr.functor in BUILTINS:
            if BUILTINS[expr.functor] != expr.arity:
                self.error(f"builtin {expr.functor} takes {BUILTINS[expr.functor]} arguments", tok)
            for a in expr.args:
                self._check_builtins(a, tok)

    # --- statements

    def block(self, bound: set) -> tuple[tuple, set]:
        self.expect("{")
        stmts = []
        while not self.accept("}"):
            if self.peek.kind == "EOF":
                self.error("unterminated block")
            st, bound = self.statement(bound)
            stmts.append(st)
            self.accept(";")
        return tuple(stmts), bound

    def statement(self, bound: set):
        tok = self.peek
        if self.accept("+"):
            t = self.term()
            self.need_bound(t, bound, tok)
            return Add(t), bound
        if self.accept("-"):
            t = self.term()
            self.need_bound(t, bound, tok, allow_anonymous=True)
            return Remove(t), bound
        if self.accept_kw("if"):
            guards, gbound = self.guards(set(bound))
            self.expect_kw("then")
            then, _ = self.block(gbound)
            orelse: tuple = ()
            if self.accept_kw("else"):
                orelse, _ = self.block(set(bound))
            return If(guards, then, orelse), bound
        if self.accept_kw("forall"):
            names = []
            while True:
                vt = self.next()
                if vt.kind != "VAR" or vt.text == "_":
                    self.error("expected a projection variable", vt)
                names.append(vt.text)
                if not self.accept(","):
                    break
            limit = None
            if self.accept_kw("limit"):
                ltok = self.peek
                limit = self.term()
                self.need_bound(limit, bound, ltok)
            self.expect(":")
            guards, gbound = self.guards(set(bound))
            for n in names:
                if n not in gbound:
                    self.error(f"projection variable {n} is not bound by the guards", tok)
            body, _ = self.block(bound | set(names))
            return ForAll(tuple(Var(n) for n in names), limit, guards, body), bound
        if self.accept_kw("return"):
            return Return(), bound
        if self.peek.kind == "IDENT" and self.peek.text in OPS:
            name = self.next().text
            args = None
            if self.peek.text == "(":
                t = Term(name, self._args(True, 1))
                args = t.args
            if (len(args) if args is not None else 0) not in OPS[name]:
                self.error(f"wrong number of arguments to {name}", tok)
            for a in args or ():
                self.need_bound(a, bound, tok)
            return OpStmt(name, args), bound
        if self.peek.kind == "VAR" and self.peek_at(1).text == "is":
            left = self.term()
            self.next()
            return self._bind(left, bound, tok)
        self.error(f"expected a statement, found {tok.text or 'end of input'!r}", tok)


def parse_law(source: str) -> Law:
    """Parse law text. Raises LawSyntaxError carrying line and column."""
    parser = _Parser(tokenize(source))
    return parser.law()


def load_law(path) -> Law:
    with open(path, encoding="utf-8") as fh:
        return parse_law(fh.read())


# ---------------------------------------------------------------- pretty printer

_IND = "    "


def _guard_text(g) -> str:
    if isinstance(g, InState):
        return f"{to_text(g.pattern)}@CS"
    if isinstance(g, InList):
        return f"{to_text(g.pattern)}@{to_text(g.source)}"
    if isinstance(g, Compare):
        return f"{to_text(g.left)} {g.op} {to_text(g.right)}"
    if isinstance(g, Not):
        return "not " + _guard_text(g.guards[0])
    if isinstance(g, Or):
        return "(" + " ; ".join(_guards_text(b) for b in g.branches) + ")"
    if isinstance(g, IsControlled):
        return f"controlled({to_text(g.arg)})"
    if isinstance(g, Bind):
        return f"{g.var.name} is {to_text(g.expr)}"
    raise TypeError(g)


def _guards_text(gs) -> str:
    return ", ".join(_guard_text(g) for g in gs)


def _block_lines(stmts, level: int) -> list[str]:
    lines = []
    pad = _IND * level
    for st in stmts:
        if isinstance(st, Add):
            lines.append(f"{pad}+{to_text(st.term)}")
        elif isinstance(st, Remove):
            lines.append(f"{pad}-{to_text(st.term)}")
        elif isinstance(st, OpStmt):
            args = "" if st.args is None else "(" + ", ".join(to_text(a) for a in st.args) + ")"
            lines.append(f"{pad}{st.name}{args}")
        elif isinstance(st, Return):
            lines.append(f"{pad}return")
        elif isinstance(st, Bind):
            lines.append(pad + _guard_text(st))
        elif isinstance(st, If):
            lines.append(f"{pad}if {_guards_text(st.guards)} then {{")
            lines.extend(_block_lines(st.then, level + 1))
            if st.orelse:
                lines.append(f"{pad}}} else {{")
                lines.extend(_block_lines(st.orelse, level + 1))
            lines.append(f"{pad}}}")
        elif isinstance(st, ForAll):
            names = ", ".join(v.name for v in st.vars)
            lim = f" limit {to_text(st.limit)}" if st.limit is not None else ""
            lines.append(f"{pad}forall {names}{lim} : {_guards_text(st.guards)} {{")
            lines.extend(_block_lines(st.body, level + 1))
            lines.append(f"{pad}}}")
        else:
            raise TypeError(st)
    return lines


def pretty_print(law: Law) -> str:
    """Canonical text of a law; the input of :func:`law_hash`."""
    out = [f"law {law.name}."]
    for kw, names in (("controlled", law.controlled), ("single", law.single), ("internal", law.internal)):
        if names:
            out.append(f"{kw} {', '.join(sorted(names))}.")
    for r in law.rules:
        out.append("")
        head = f"{r.label}: UPON {to_text(r.pattern)}"
        if r.guards:
            head += f" :- {_guards_text(r.guards)}"
        out.append(head + " {")
        out.extend(_block_lines(r.body, 1))
        out.append("}")
    return "\n".join(out) + "\n"


def law_hash(law: Law) -> str:
    return hashlib.sha256(pretty_print(law).encode("utf-8")).hexdigest()


# ---------------------------------------------------------------- evaluation


@dataclass(frozen=True)
class Ruling:
    state: ControlState
    ops: tuple = ()
    deltas: tuple = ()
    rule: Optional[str] = None
    diagnostic: Optional[str] = None

    def __iter__(self):
        # (state, ops) unpacking
        return iter((self.state, self.ops))


class _Return(Exception):
    pass


class _Eval:
    def __init__(self, law: Law, event: Event, state: ControlState, budget: int):
        self.law = law
        self.event = event
        self.state = state
        self.steps = 0
        self.budget = budget
        self.ops: list = []
        self.deltas: list = []

    def tick(self):
        self.steps += 1
        if self.steps > self.budget:
            raise StepBudgetExceeded(f"step budget of {self.budget} exceeded")

    # --- guards

    def solve(self, guards: tuple, b: dict) -> Iterator[dict]:
        if not guards:
            yield b
            return
        first, rest = guards[0], guards[1:]
        for b2 in self.solve_one(first, b):
            yield from self.solve(rest, b2)

    def _members(self, src) -> tuple:
        if isinstance(src, Term):
            if src.functor == LIST:
                return src.args
            if src.functor == "profile" and src.arity == 1 and isinstance(src.args[0], Term):
                return src.args[0].args if src.args[0].functor == LIST else ()
        return ()

    def solve_one(self, g, b: dict) -> Iterator[dict]:
        self.tick()
        if isinstance(g, InState):
            pat = substitute(g.pattern, b, strict=False)
            f = functor_name(pat)
            candidates = self.state.bucket(f) if f is not None else self.state.sorted_terms()
            for t in candidates:
                self.tick()
                m = match_pattern(pat, t, b)
                if m is not None:
                    yield m
        elif isinstance(g, InList):
            pat = substitute(g.pattern, b, strict=False)
            for t in self._members(substitute(g.source, b)):
                self.tick()
                m = match_pattern(pat, t, b)
                if m is not None:
                    yield m
        elif isinstance(g, Compare):
            left, right = substitute(g.left, b), substitute(g.right, b)
            if _compare(g.op, left, right):
                yield b
        elif isinstance(g, Not):
            if next(self.solve(g.guards, b), None) is None:
                yield b
        elif isinstance(g, Or):
            for branch in g.branches:
                yield from self.solve(branch, b)
        elif isinstance(g, IsControlled):
            f = functor_name(substitute(g.arg, b))
            if f is not None and f in self.law.controlled:
                yield b
        elif isinstance(g, Bind):
            yield {**b, g.var.name: self.expr(g.expr, b)}
        else:
            raise TypeError(g)

    # --- expressions

    def expr(self, t, b: dict):
        self.tick()
        if isinstance(t, Term) and isinstance(t.functor, str) and t.functor in BUILTINS and BUILTINS[t.functor] == t.arity:
            args = [self.expr(a, b) for a in t.args]
            return self.builtin(t.functor, args)
        v = substitute(t, b)
        check_depth(v)
        return v

    def builtin(self, name: str, args: list):
        if name == "plus":
            return _int(args[0]) + _int(args[1])
        if name == "minus":
            return _int(args[0]) - _int(args[1])
        if name == "take":
            return mklist(_list(args[1])[: max(0, _int(args[0]))])
        if name == "length":
            return len(_list(args[0]))
        if name == "profile":
            return Term("profile", (mklist(self.law.profile(self.state)),))
        if name == "value":
            f = functor_name(args[0])
            if f is None:
                raise TermError("value/2 needs an attribute name")
            for t in self.state.bucket(f):
                if t.args:
                    return t.args[0]
            return args[1]
        raise TermError(f"unknown builtin {name}")

    # --- statements

    def run(self, stmts: tuple, b: dict) -> dict:
        for st in stmts:
            self.tick()
            b = self.exec(st, b)
        return b

    def _delta(self, d):
        self.deltas.append(d)
        self.state = self.state.apply(d)

    def exec(self, st, b: dict) -> dict:
        if isinstance(st, Add):
            t = substitute(st.term, b)
            check_depth(t)
            self._delta(AddState(t))
        elif isinstance(st, Remove):
            self._delta(RemoveState(substitute(st.term, b)))
        elif isinstance(st, OpStmt):
            self.ops.append(self.op(st, b))
        elif isinstance(st, If):
            sol = next(self.solve(st.guards, b), None)
            if sol is not None:
                self.run(st.then, sol)
            else:
                self.run(st.orelse, b)
        elif isinstance(st, ForAll):
            seen = {}
            for sol in self.solve(st.guards, b):
                proj = tuple(sol[v.name] for v in st.vars)
                seen.setdefault(tuple(sort_key(x) for x in proj), proj)
            chosen = [seen[k] for k in sorted(seen)]
            if st.limit is not None:
                chosen = chosen[: max(0, _int(substitute(st.limit, b)))]
            for proj in chosen:
                inner = dict(b)
                inner.update({v.name: x for v, x in zip(st.vars, proj)})
                self.run(st.body, inner)
        elif isinstance(st, Bind):
            b = {**b, st.var.name: self.expr(st.expr, b)}
        elif isinstance(st, Return):
            raise _Return()
        else:
            raise TypeError(st)
        return b

    def op(self, st: OpStmt, b: dict):
        ev = self.event
        if st.args is None and st.name in ("forward", "deliver"):
            args = (ev.source, ev.payload, ev.target)
        else:
            args = tuple(substitute(a, b) for a in st.args or ())
        for a in args:
            check_depth(a)
        return {
            "forward": Forward,
            "deliver": Deliver,
            "release": Release,
            "inform": Inform,
            "quit": Quit,
        }[st.name](*args)


def _int(x) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        raise TermError(f"expected an integer, got {to_text(x)}")
    return x


def _list(x) -> tuple:
    if isinstance(x, Term) and x.functor == LIST:
        return x.args
    raise TermError(f"expected a list, got {to_text(x)}")


def _compare(op: str, left, right) -> bool:
    if op == "==":
        return left == right
    if op == "!=":
        return left != right
    if not (isinstance(left, int) and isinstance(right, int)):
        return False
    return {"<": left < right, "<=": left <= right, ">": left > right, ">=": left >= right}[op]


def evaluate(law: Law, event: Event, state: ControlState, budget: int = STEP_BUDGET) -> Ruling:
    """Rule on one event at one agent. Never raises for well-formed inputs."""
    ev = event.to_term()
    ctx = _Eval(law, event, state, budget)
    try:
        for rule in law.rules:
            ctx.tick()
            b = match_pattern(rule.pattern, ev)
            if b is None:
                continue
            sol = next(ctx.solve(rule.guards, b), None)
            if sol is None:
                continue
            try:
                ctx.run(rule.body, sol)
            except _Return:
                pass
            return Ruling(ctx.state, tuple(ctx.ops), tuple(ctx.deltas), rule.label)
    except (StepBudgetExceeded, TermError) as exc:
        log.warning("law %s: malformed ruling for %s: %s", law.name, to_text(ev), exc)
        return Ruling(state, (), (), None, str(exc))
    return Ruling(state)
