import pytest
from hypothesis import given, strategies as st

from lgiosc.terms import (
    LIST, MAX_DEPTH, ListPattern, Term, TermError, Var, atom, check_depth, depth, is_ground,
    match_pattern, mklist, parse_term, substitute, to_text,
)

idents = st.from_regex(r"[a-z][a-z0-9_]{0,6}", fullmatch=True)
leaves = st.one_of(
    idents.map(atom),
    st.integers(-1000, 1000),
    st.text(st.characters(blacklist_categories=("Cs",)), max_size=8),
)
ground = st.recursive(
    leaves,
    lambda kids: st.one_of(
        st.tuples(idents, st.lists(kids, min_size=1, max_size=3)).map(lambda p: Term(p[0], tuple(p[1]))),
        st.lists(kids, max_size=3).map(mklist),
    ),
    max_leaves=12,
)


def test_atoms_and_compounds_print_canonically():
    t = parse_term("f( a ,  g(X, 42), \"hi\" , [1,2 | T] )")
    assert to_text(t) == 'f(a, g(X, 42), "hi", [1, 2 | T])'


def test_tags_and_quoted_atoms():
    assert to_text(parse_term("#management#")) == "#management#"
    assert parse_term("'Hello world'") == atom("Hello world")
    assert to_text(atom("Hello world")) == "'Hello world'"


def test_comment_does_not_eat_tag():
    assert parse_term("publish(#tech#) # trailing note") == Term("publish", (atom("#tech#"),))


def test_negative_integers():
    assert parse_term("f(-3, [-1])") == Term("f", (-3, mklist([-1])))


def test_structural_equality():
    assert parse_term("f(a, [b])") == parse_term("f(a,[b])")
    assert parse_term("f(a)") != parse_term("f(a, a)")


def test_syntax_error_has_position():
    with pytest.raises(TermError) as exc:
        parse_term("f(a,\n  )")
    assert exc.value.line == 2


def test_depth_limit():
    t = atom("x")
    for _ in range(MAX_DEPTH - 1):
        t = Term("f", (t,))
    check_depth(t)
    assert depth(Term("f", (t,))) == MAX_DEPTH + 1
    with pytest.raises(TermError):
        check_depth(Term("f", (t,)))
    with pytest.raises(TermError):
        parse_term("f(" * (MAX_DEPTH + 1) + "x" + ")" * (MAX_DEPTH + 1))


def test_certificate_pattern_binds():
    p = parse_term("cert(issuer(ca), subj(X), attr(A))")
    v = parse_term("cert(issuer(ca), subj(alice), attr(role(manager)))")
    assert match_pattern(p, v) == {"X": atom("alice"), "A": parse_term("role(manager)")}


def test_repeated_variable_must_agree():
    assert match_pattern(parse_term("f(X, X)"), parse_term("f(a, b)")) is None
    assert match_pattern(parse_term("f(X, X)"), parse_term("f(a, a)")) == {"X": atom("a")}


def test_anonymous_variable_binds_nothing():
    assert match_pattern(parse_term("f(_, _)"), parse_term("f(a, b)")) == {}


def test_variable_functor_and_list_tail():
    b = match_pattern(parse_term("F(V)"), parse_term("interest(chess)"))
    assert b == {"F": atom("interest"), "V": atom("chess")}
    b = match_pattern(parse_term("[H | T]"), parse_term("[1, 2, 3]"))
    assert b == {"H": 1, "T": mklist([2, 3])}
    assert match_pattern(parse_term("[H | T]"), mklist([])) is None


def test_literal_types_do_not_cross():
    assert match_pattern(parse_term('"1"'), 1) is None
    assert match_pattern(atom("a"), "a") is None


def test_substitute_rebuilds():
    b = {"F": atom("interest"), "V": atom("go"), "T": mklist([2])}
    assert substitute(parse_term("F(V)"), b) == parse_term("interest(go)")
    assert substitute(parse_term("[1 | T]"), b) == mklist([1, 2])
    with pytest.raises(TermError):
        substitute(parse_term("g(Y)"), b)
    assert substitute(parse_term("g(Y)"), b, strict=False) == Term("g", (Var("Y"),))


def test_list_pattern_type():
    t = parse_term("[a | Rest]")
    assert isinstance(t, ListPattern) and t.tail == Var("Rest")
    assert not is_ground(t)
    assert parse_term("[]") == Term(LIST)


@given(ground)
def test_print_parse_round_trip(t):
    assert parse_term(to_text(t)) == t


@given(ground)
def test_ground_term_matches_itself_with_empty_bindings(t):
    assert match_pattern(t, t) == {}


@given(ground, ground)
def test_distinct_ground_terms_do_not_match(a, b):
    if a != b:
        assert match_pattern(a, b) is None
