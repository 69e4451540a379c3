"""Terms, the shared value language of laws, envelopes, scenarios and traces.

A term is one of:

* an ``int``
* a ``str`` (a string literal, printed in double quotes)
* a :class:`Term` (``functor(args...)``; an atom is a Term with no args)
* a :class:`Var` (only inside patterns)

Lists are Terms whose functor is ``LIST``; a pattern list with an open tail
is a :class:`ListPattern`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Union

MAX_DEPTH = 16
LIST = "[]"


class TermError(ValueError):
    """Raised for malformed term text or terms violating structural limits."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.line = line
        self.col = col
        where = f" at line {line}, column {col}" if line is not None else ""
        super().__init__(message + where)


@dataclass(frozen=True)
class Var:
    name: str

    @property
    def anonymous(self) -> bool:
        return self.name == "_"


@dataclass(frozen=True)
class Term:
    functor: Union[str, Var]
    args: tuple = ()

    def __post_init__(self):
        if isinstance(self.functor, str) and not self.functor:
            raise TermError("empty functor")

    @property
    def arity(self) -> int:
        return len(self.args)

    @property
    def is_list(self) -> bool:
        return self.functor == LIST

    def __str__(self) -> str:
        return to_text(self)


@dataclass(frozen=True)
class ListPattern:
    """``[H1, H2 | Tail]`` inside a pattern or rule body."""

    items: tuple
    tail: Var


Value = Union[int, str, Term, Var, ListPattern]


def atom(name: str) -> Term:
    return Term(name)


def mklist(items) -> Term:
    return Term(LIST, tuple(items))


def is_atom(t) -> bool:
    return isinstance(t, Term) and not t.args and isinstance(t.functor, str) and t.functor != LIST


def functor_name(t) -> str | None:
    if isinstance(t, Term) and isinstance(t.functor, str) and t.functor != LIST:
        return t.functor
    return None


def depth(t) -> int:
    if isinstance(t, Term):
        return 1 + max((depth(a) for a in t.args), default=0)
    if isinstance(t, ListPattern):
        return 1 + max((depth(a) for a in t.items), default=0)
    return 1


def check_depth(t, limit: int = MAX_DEPTH) -> None:
    if depth(t) > limit:
        raise TermError(f"term nesting exceeds depth limit {limit}")


def variables(t) -> Iterator[Var]:
    if isinstance(t, Var):
        yield t
    elif isinstance(t, Term):
        if isinstance(t.functor, Var):
            yield t.functor
        for a in t.args:
            yield from variables(a)
    elif isinstance(t, ListPattern):
        for a in t.items:
            yield from variables(a)
        yield t.tail


def is_ground(t) -> bool:
    return next(variables(t), None) is None


# ---------------------------------------------------------------- printing

_IDENT = re.compile(r"[a-z][A-Za-z0-9_]*(?:-[A-Za-z0-9_]+)*\Z")
_TAG = re.compile(r"#[A-Za-z_][A-Za-z0-9_-]*#\Z")


def _atom_text(name: str) -> str:
    if _IDENT.match(name) or _TAG.match(name):
        return name
    return "'" + name.replace("\\", "\\\\").replace("'", "\\'") + "'"


def _str_text(s: str) -> str:
    out = s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t")
    return f'"{out}"'


def to_text(t) -> str:
    """Canonical single-line text of a term."""
    if isinstance(t, bool):
        raise TermError("booleans are not terms")
    if isinstance(t, int):
        return str(t)
    if isinstance(t, str):
        return _str_text(t)
    if isinstance(t, Var):
        return t.name
    if isinstance(t, ListPattern):
        head = ", ".join(to_text(a) for a in t.items)
        return f"[{head} | {t.tail.name}]"
    if isinstance(t, Term):
        if t.functor == LIST:
            return "[" + ", ".join(to_text(a) for a in t.args) + "]"
        f = t.functor.name if isinstance(t.functor, Var) else _atom_text(t.functor)
        if not t.args:
            return f
        return f + "(" + ", ".join(to_text(a) for a in t.args) + ")"
    raise TermError(f"not a term: {t!r}")


def sort_key(t) -> str:
    return to_text(t)


# ---------------------------------------------------------------- lexing

TOKEN_SPEC = [
    ("WS", r"[ \t\r]+"),
    ("NL", r"\n"),
    ("TAG", r"#[A-Za-z_][A-Za-z0-9_-]*#"),
    ("COMMENT", r"#[^\n]*"),
    ("STRING", r'"(?:\\.|[^"\\\n])*"'),
    ("QATOM", r"'(?:\\.|[^'\\\n])*'"),
    ("INT", r"\d+"),
    ("IDENT", r"[a-z][A-Za-z0-9_]*(?:-[A-Za-z0-9_]+)*"),
    ("VAR", r"[A-Z_][A-Za-z0-9_]*"),
    ("OP", r":-|==|!=|<=|>=|[<>()\[\]{},;|:.@+\-]"),
]
_LEXER = re.compile("|".join(f"(?P<{n}>{p})" for n, p in TOKEN_SPEC))
_NEG_CONTEXT = {"(", ",", "[", "|", "==", "!=", "<", "<=", ">", ">="}


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int
    pos: int
    end: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _LEXER.match(text, pos)
        if not m:
            raise TermError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        tok_text = m.group()
        col = pos - line_start + 1
        if kind == "NL":
            line += 1
            line_start = m.end()
        elif kind not in ("WS", "COMMENT"):
            # negative integer literal, only where a term may start
            if (
                kind == "INT"
                and tokens
                and tokens[-1].text == "-"
                and tokens[-1].end == pos
                and (len(tokens) == 1 or tokens[-2].text in _NEG_CONTEXT)
            ):
                minus = tokens.pop()
                tokens.append(Token("INT", "-" + tok_text, minus.line, minus.col, minus.pos, m.end()))
            else:
                tokens.append(Token(kind, tok_text, line, col, pos, m.end()))
        pos = m.end()
    tokens.append(Token("EOF", "", line, pos - line_start + 1, pos, pos))
    return tokens


def _unescape(body: str) -> str:
    out, i = [], 0
    while i < len(body):
        c = body[i]
        if c == "\\" and i + 1 < len(body):
            n = body[i + 1]
            out.append({"n": "\n", "t": "\t"}.get(n, n))
            i += 2
        else:
            out.append(c)
            i += 1
    return "".join(out)


class TokenStream:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.i = 0

    @property
    def peek(self) -> Token:
        return self.tokens[self.i]

    def peek_at(self, k: int) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.tokens[self.i]
        if tok.kind != "EOF":
            self.i += 1
        return tok

    def at(self, text: str) -> bool:
        tok = self.peek
        return tok.text == text and tok.kind in ("OP", "IDENT")

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.next()
            return True
        return False

    def expect(self, text: str) -> Token:
        tok = self.peek
        if not self.at(text):
            self.error(f"expected {text!r}, found {tok.text or 'end of input'!r}")
        return self.next()

    def error(self, message: str, tok: Token | None = None):
        tok = tok or self.peek
        raise TermError(message, tok.line, tok.col)

    # terms -----------------------------------------------------------

    def term(self, allow_vars: bool = True, _depth: int = 1):
        if _depth > MAX_DEPTH:
            self.error(f"term nesting exceeds depth limit {MAX_DEPTH}")
        tok = self.next()
        if tok.kind == "INT":
            return int(tok.text)
        if tok.kind == "STRING":
            return _unescape(tok.text[1:-1])
        if tok.kind in ("IDENT", "TAG", "QATOM"):
            name = _unescape(tok.text[1:-1]) if tok.kind == "QATOM" else tok.text
            if self.peek.text == "(" and self.peek.pos == tok.end:
                return Term(name, self._args(allow_vars, _depth))
            return Term(name)
        if tok.kind == "VAR":
            if not allow_vars:
                self.error(f"variable {tok.text} not allowed here", tok)
            if self.peek.text == "(" and self.peek.pos == tok.end:
                return Term(Var(tok.text), self._args(allow_vars, _depth))
            return Var(tok.text)
        if tok.text == "[":
            items = []
            if self.accept("]"):
                return Term(LIST)
            items.append(self.term(allow_vars, _depth + 1))
            while self.accept(","):
                items.append(self.term(allow_vars, _depth + 1))
            if self.accept("|"):
                tail_tok = self.next()
                if tail_tok.kind != "VAR" or not allow_vars:
                    self.error("list tail must be a variable", tail_tok)
                self.expect("]")
                return ListPattern(tuple(items), Var(tail_tok.text))
            self.expect("]")
            return Term(LIST, tuple(items))
        self.error(f"expected a term, found {tok.text or 'end of input'!r}", tok)

    def _args(self, allow_vars: bool, _depth: int) -> tuple:
        self.expect("(")
        args = [self.term(allow_vars, _depth + 1)]
        while self.accept(","):
            args.append(self.term(allow_vars, _depth + 1))
        self.expect(")")
        return tuple(args)


def parse_term(text: str, allow_vars: bool = True):
    ts = TokenStream(tokenize(text))
    t = ts.term(allow_vars)
    if ts.peek.kind != "EOF":
        ts.error(f"trailing input {ts.peek.text!r}")
    return t


# ---------------------------------------------------------------- matching

Bindings = dict


def match_pattern(pattern, value, bindings: Bindings | None = None) -> Bindings | None:
    """One-way match of ``pattern`` against ``value``.

    Variables occur only in the pattern; a repeated variable must bind to
    equal values. ``_`` matches anything and binds nothing. Returns the
    extended bindings, or None on mismatch. The input mapping is not mutated.
    """
    b = dict(bindings) if bindings else {}
    return b if _match(pattern, value, b) else None


def _bind(var: Var, value, b: Bindings) -> bool:
    if var.anonymous:
        return True
    if var.name in b:
        return b[var.name] == value
    b[var.name] = value
    return True


def _match(p, v, b: Bindings) -> bool:
    if isinstance(p, Var):
        return _bind(p, v, b)
    if isinstance(p, ListPattern):
        if not (isinstance(v, Term) and v.functor == LIST and len(v.args) >= len(p.items)):
            return False
        for pi, vi in zip(p.items, v.args):
            if not _match(pi, vi, b):
                return False
        return _bind(p.tail, Term(LIST, v.args[len(p.items):]), b)
    if isinstance(p, Term):
        if not isinstance(v, Term) or len(p.args) != len(v.args):
            return False
        if isinstance(p.functor, Var):
            # a variable functor binds to the bare atom of the value's functor
            if not isinstance(v.functor, str) or v.functor == LIST:
                return False
            if not _bind(p.functor, Term(v.functor), b):
                return False
        elif p.functor != v.functor:
            return False
        return all(_match(pa, va, b) for pa, va in zip(p.args, v.args))
    # int / str literals
    return type(p) is type(v) and p == v


def substitute(t, b: Bindings, strict: bool = True):
    """Instantiate a pattern under bindings.

    With ``strict`` an unbound named variable raises TermError; otherwise it
    is left in place. ``_`` is always left in place.
    """
    if isinstance(t, Var):
        if t.name in b:
            return b[t.name]
        if strict and not t.anonymous:
            raise TermError(f"unbound variable {t.name}")
        return t
    if isinstance(t, ListPattern):
        items = tuple(substitute(a, b, strict) for a in t.items)
        tail = substitute(t.tail, b, strict)
        if isinstance(tail, Term) and tail.functor == LIST:
            return Term(LIST, items + tail.args)
        if strict:
            raise TermError(f"list tail {t.tail.name} is not a list")
        return ListPattern(items, t.tail)
    if isinstance(t, Term):
        f = t.functor
        if isinstance(f, Var):
            bound = b.get(f.name)
            if bound is None:
                if strict:
                    raise TermError(f"unbound functor variable {f.name}")
            else:
                name = functor_name(bound)
                if name is None or bound.args:
                    raise TermError(f"functor variable {f.name} bound to non-atom {to_text(bound)}")
                f = name
        return Term(f, tuple(substitute(a, b, strict) for a in t.args))
    return t
