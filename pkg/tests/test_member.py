import random

import pytest

from lgiosc.controller import Controller, adopt
from lgiosc.laws import builtin_law
from lgiosc.member import (
    CrudQuery, DatabaseError, MemberDatabase, Post, add_filter, add_profile_attribute, check_address,
    crud_execute, db_message, handle_release, profile_of, publish_message, search_records,
    update_profile_attribute,
)
from lgiosc.support import CertificateAuthority
from lgiosc.terms import Term, atom, mklist, parse_term, to_text

KEY = "k"


def post(author, seq, body="b", ptype="#tech#"):
    return parse_term(f'post(id({author}, {seq}), {author}, {ptype}, "{body}")')


def member(attrs=("group(t1)",), name="alice"):
    ca = CertificateAuthority(KEY)
    c = Controller("c1")
    adopt(c, builtin_law("be"), ca.issue(name, [parse_term(a) for a in attrs]), KEY, f"db://be.example/{name}",
          ("db://be.example/",))
    return c


def test_create_then_read():
    db = MemberDatabase("db://be.example/a")
    assert crud_execute(db, CrudQuery("create", post("a", 1))) == parse_term("created(id(a, 1))")
    assert crud_execute(db, CrudQuery("read", parse_term("id(a, 1)"))) == Term("records", (mklist([post("a", 1)]),))
    assert crud_execute(db, CrudQuery("read", parse_term("id(a, 9)"))) == Term("records", (mklist([]),))


def test_missing_ids_report_not_found():
    db = MemberDatabase("x")
    assert crud_execute(db, CrudQuery("update", post("a", 1))).functor == "notFound"
    assert crud_execute(db, CrudQuery("delete", parse_term("id(a, 1)"))).functor == "notFound"


def test_non_crud_verb_rejected():
    with pytest.raises(DatabaseError):
        CrudQuery("drop", atom("x"))
    assert handle_release(MemberDatabase("x"), parse_term("drop(x)")).functor == "invalid"


def test_read_by_pattern_and_search():
    db = MemberDatabase("x")
    for i, t in enumerate(["#tech#", "#social#", "#tech#"], 1):
        crud_execute(db, CrudQuery("create", post("a", i, ptype=t)))
    pattern = parse_term("post(_, _, #tech#, _)")
    got = crud_execute(db, CrudQuery("read", pattern)).args[0].args
    assert [to_text(p.args[0]) for p in got] == ["id(a, 1)", "id(a, 3)"]
    assert search_records(db, pattern) == [parse_term("id(a, 1)"), parse_term("id(a, 3)")]
    hits = handle_release(db, parse_term("search(q1, post(_, _, #tech#, _), bob, 2)"))
    assert hits == parse_term("hits(q1, bob, 2, [id(a, 1), id(a, 3)])")
    assert handle_release(None, parse_term("read(x)")).functor == "noDatabase"


def test_random_crud_against_map_oracle():
    rng = random.Random(5)
    db, oracle = MemberDatabase("x"), {}
    for _ in range(50):
        seq = rng.randint(1, 8)
        verb = rng.choice(["create", "read", "update", "delete"])
        key = f"id(a, {seq})"
        if verb in ("create", "update"):
            p = post("a", seq, body=str(rng.random()))
            res = crud_execute(db, CrudQuery(verb, p))
            if verb == "create" and key not in oracle:
                oracle[key] = p
                assert res.functor == "created"
            elif verb == "update" and key in oracle:
                oracle[key] = p
                assert res.functor == "updated"
        elif verb == "delete":
            res = crud_execute(db, CrudQuery(verb, parse_term(key)))
            assert (res.functor == "deleted") == (oracle.pop(key, None) is not None)
        else:
            res = crud_execute(db, CrudQuery(verb, parse_term(key)))
            assert list(res.args[0].args) == ([oracle[key]] if key in oracle else [])
    assert {k: to_text(v) for k, v in oracle.items()} == {
        k: to_text(p.to_term()) for k, p in db.records.items()}


def test_dump_load_round_trip(tmp_path):
    db = MemberDatabase("x")
    for i in range(3):
        crud_execute(db, CrudQuery("create", post("a", i + 1, body=f"line {i}\\nnext")))
    again = MemberDatabase.load("x", db.dump())
    assert again.records == db.records


def test_post_validation():
    with pytest.raises(DatabaseError):
        Post.from_term(parse_term('post(x, a, #t#, "b")'))
    p = Post.from_term(post("a", 4))
    assert p.seq == 4 and p.to_term() == post("a", 4)


def test_domain_constraint():
    check_address("db://be.example/alice", ["db://be.example/"])
    with pytest.raises(DatabaseError):
        check_address("db://evil.example/alice", ["db://be.example/"])


def test_profile_api():
    c = member()
    assert add_profile_attribute(c, parse_term("interest(chess)"))
    assert parse_term("interest(chess)") in c.state
    assert not add_profile_attribute(c, parse_term("role(manager)"))
    assert parse_term("role(manager)") not in c.state
    assert update_profile_attribute(c, parse_term("interest(go)"))
    assert [t for t in c.state if t.functor == "interest"] == [parse_term("interest(go)")]
    add_filter(c, parse_term("group(t2)"))
    add_filter(c, parse_term("group(t2)"))
    assert [t for t in c.state if t.functor == "filter"] == [parse_term("filter(group(t2))")]
    assert parse_term("interest(go)") in profile_of(c)


def test_message_builders():
    assert db_message(atom("x")) == parse_term("#db#(x)")
    assert publish_message("tech", "hi") == parse_term('publish(post(#tech#, "hi"))')
    assert publish_message("#management#", "hi").args[0].args[0] == atom("#management#")
