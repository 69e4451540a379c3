"""Scenario files and the scenario runner.

A scenario file holds one term per line (``#`` comments allowed). The
bootstrap declarations come first, then the steps::

    seed(7)
    law(be)                       # builtin law, alias be
    law(other, open)              # builtin law "open" under alias other
    law(mine, "path/to/x.law")    # law file, relative to the scenario file
    cakey("secret")
    pool(256)
    domain("db://be.example/")

    adopt(alice, [role(manager), group(t1)])
    adopt(carol, [group(t1)], [law(other), db("db://be.example/carol")])
    certify(alice, [group(t2)])
    add_profile(alice, interest(chess))
    update_profile(alice, interest(go))
    add_filter(alice, group(t2))
    subscribe(bob, alice)
    publish(alice, #tech#, "hello")
    dm(alice, bob, hello)
    db(alice, read(id(alice, 1)))
    search(alice, post(_, _, #tech#, _), 2, 3)
    revoke(alice, bob)
    readopt(bob)
    detach(bob)
    attach(bob)
    send(alice, bob, anything(at, all))
    drain

Agents are referred to by the name the secretary handed out.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from ..controller import AdoptionRefused
from ..law import load_law
from ..laws import BUILTIN, builtin_law
from ..member import db_message, publish_message
from ..terms import LIST, Term, TermError, atom, is_atom, parse_term, to_text, tokenize
from .network import Network, ScenarioError
from .trace import Trace

BOOTSTRAP = ("seed", "law", "cakey", "pool", "domain")
STEPS = {
    "adopt": (2, 3), "certify": (2,), "add_profile": (2,), "update_profile": (2,),
    "add_filter": (2,), "subscribe": (2,), "publish": (3,), "dm": (3,), "db": (2,),
    "search": (4,), "revoke": (2,), "readopt": (1,), "detach": (1,), "attach": (1,),
    "send": (3,), "drain": (0,),
}


@dataclass
class Scenario:
    seed: int = 0
    laws: list = field(default_factory=list)
    ca_key: str = "community-ca-key"
    pool: int = 256
    domains: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    base_dir: Path | None = None

    def text(self) -> str:
        lines = [f"seed({self.seed})"]
        for alias, source in self.laws:
            lines.append(to_text(Term("law", (atom(alias), source))))
        lines.append(to_text(Term("cakey", (self.ca_key,))))
        lines.append(f"pool({self.pool})")
        for d in self.domains:
            lines.append(to_text(Term("domain", (d,))))
        lines.extend(to_text(s) for s in self.steps)
        return "\n".join(lines) + "\n"


def _name(t, what="agent") -> str:
    if not is_atom(t):
        raise ScenarioError(f"expected an {what} name, got {to_text(t)}")
    return t.functor


def _list(t) -> tuple:
    if not (isinstance(t, Term) and t.functor == LIST):
        raise ScenarioError(f"expected a list, got {to_text(t)}")
    return t.args


def parse_scenario(text: str, base_dir=None) -> Scenario:
    s = Scenario(base_dir=Path(base_dir) if base_dir else None)
    seen_step = False
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.strip()
        try:
            if len(tokenize(body)) == 1:
                continue
            t = parse_term(body)
        except TermError as exc:
            raise ScenarioError(f"line {lineno}: {exc}") from exc
        if not isinstance(t, Term) or not isinstance(t.functor, str):
            raise ScenarioError(f"line {lineno}: not a step: {body}")
        f = t.functor
        if f in BOOTSTRAP:
            if seen_step:
                raise ScenarioError(f"line {lineno}: bootstrap declaration {f} after the first step")
            if f == "seed" and t.arity == 1 and isinstance(t.args[0], int):
                s.seed = t.args[0]
            elif f == "law" and t.arity in (1, 2):
                alias = _name(t.args[0], "law")
                source = t.args[1] if t.arity == 2 else t.args[0]
                s.laws.append((alias, source))
            elif f == "cakey" and t.arity == 1 and isinstance(t.args[0], str):
                s.ca_key = t.args[0]
            elif f == "pool" and t.arity == 1 and isinstance(t.args[0], int):
                s.pool = t.args[0]
            elif f == "domain" and t.arity == 1 and isinstance(t.args[0], str):
                s.domains.append(t.args[0])
            else:
                raise ScenarioError(f"line {lineno}: malformed declaration {body}")
            continue
        if f not in STEPS or t.arity not in STEPS[f]:
            raise ScenarioError(f"line {lineno}: unknown or malformed step {body}")
        seen_step = True
        s.steps.append(t)
    if not s.laws:
        s.laws.append(("be", atom("be")))
    return s


def load_scenario(path) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_text(encoding="utf-8"), base_dir=path.parent)


def _resolve_law(s: Scenario, source):
    if is_atom(source) and source.functor in BUILTIN:
        return builtin_law(source.functor)
    if isinstance(source, str):
        p = Path(source)
        if not p.is_absolute() and s.base_dir is not None:
            p = s.base_dir / p
        try:
            return load_law(p)
        except OSError as exc:
            raise ScenarioError(f"cannot read law file {p}: {exc}") from exc
    raise ScenarioError(f"unknown law source {to_text(source)}")


def build_network(s: Scenario, seed: int | None = None, transport: str = "sim") -> Network:
    """Lay the foundation: laws, CA, secretary and controller pool."""
    net = Network(
        seed=s.seed if seed is None else seed,
        ca_key=s.ca_key,
        pool_capacity=s.pool,
        domains=tuple(s.domains) or ("db://be.example/",),
        transport=transport,
    )
    net.boot_record()
    for alias, source in s.laws:
        net.add_law(alias, _resolve_law(s, source))
    return net


def _opts(t) -> dict:
    out = {}
    for o in _list(t):
        if not (isinstance(o, Term) and o.arity == 1):
            raise ScenarioError(f"bad adopt option {to_text(o)}")
        out[o.functor] = o.args[0]
    return out


def run_step(net: Network, step: Term, index: int | None = None) -> None:
    f, a = step.functor, step.args
    net.trace.append("step", index if index is not None else -1, step)
    if f == "adopt":
        opts = _opts(a[2]) if len(a) == 3 else {}
        law = _name(opts["law"], "law") if "law" in opts else next(iter(net.laws))
        try:
            net.adopt(_name(a[0]), _list(a[1]), law=law, db=opts.get("db"))
        except AdoptionRefused:
            pass
    elif f == "readopt":
        try:
            net.readopt(_name(a[0]))
        except AdoptionRefused:
            pass
    elif f == "certify":
        net.certify(_name(a[0]), _list(a[1]))
    elif f == "add_profile":
        net.send(_name(a[0]), a[0], Term("addProfile", (a[1],)))
    elif f == "update_profile":
        net.send(_name(a[0]), a[0], Term("updateProfile", (a[1],)))
    elif f == "add_filter":
        net.send(_name(a[0]), a[0], Term("addFilter", (a[1],)))
    elif f == "subscribe":
        net.send(_name(a[0]), a[1], atom("requestSubscribe"))
    elif f == "publish":
        ptype = _name(a[1], "post type")
        body = a[2] if isinstance(a[2], str) else to_text(a[2])
        net.send(_name(a[0]), a[0], publish_message(ptype, body))
    elif f == "dm":
        net.send(_name(a[0]), a[1], a[2])
    elif f == "db":
        net.send(_name(a[0]), a[0], db_message(a[1]))
    elif f == "search":
        from ..search import start_search

        if not (isinstance(a[2], int) and isinstance(a[3], int)):
            raise ScenarioError("search ttl and threshold must be integers")
        start_search(net, _name(a[0]), a[1], a[2], a[3])
    elif f == "revoke":
        net.send(_name(a[0]), a[1], atom("#revoke#"))
    elif f == "detach":
        net.controller(_name(a[0])).detach()
    elif f == "attach":
        net.controller(_name(a[0])).attach()
    elif f == "send":
        net.send(_name(a[0]), a[1], a[2])
    elif f == "drain":
        net.drain(index)
    else:
        raise ScenarioError(f"unknown step {f}")


def run_scenario(s: Scenario, seed: int | None = None, transport: str = "sim",
                 network: list | None = None) -> Trace:
    """Execute a scenario under the deterministic scheduler; returns its trace.

    Pass a list as ``network`` to get the finished Network appended to it.
    """
    net = build_network(s, seed, transport)
    try:
        for i, step in enumerate(s.steps):
            run_step(net, step, i)
        if net.pending or not s.steps or s.steps[-1].functor != "drain":
            net.drain(atom("final"))
    finally:
        net.close()
    if network is not None:
        network.append(net)
    return net.trace
