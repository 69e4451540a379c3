import random

import pytest

from conftest import FIXTURES, RULES, run_file
from lgiosc.laws import builtin_law
from lgiosc.simnet import Network, ScenarioError, Trace, parse_scenario, run_scenario
from lgiosc.simnet.checks import CHECKS, check_trace
from lgiosc.simnet.workloads import community_scenario
from lgiosc.terms import atom, parse_term, to_text

SCENARIOS = sorted((FIXTURES / "scenarios").glob("*.scn")) + sorted(RULES.glob("*.scn"))


def kinds(trace):
    return [e.functor for e in trace]


def test_empty_scenario_has_only_bootstrap_entries():
    t = run_scenario(parse_scenario(""))
    assert set(kinds(t)) == {"boot", "law", "drain"}


def test_single_subscriber_gets_exactly_one_post():
    s = parse_scenario("""
    adopt(alice, [role(manager), group(t1)])
    adopt(bob, [group(t1)])
    subscribe(bob, alice)
    drain
    publish(alice, #tech#, "hello")
    drain
    """)
    t = run_scenario(s)
    posts = [e for e in t if e.functor == "deliver" and e.args[3].functor == "post"]
    assert len(posts) == 1 and posts[0].args[1] == atom("bob")


def test_fifo_per_pair():
    net = Network(seed=4)
    net.add_law("be", builtin_law("be"))
    net.adopt("a", [parse_term("group(t1)")])
    b = net.adopt("b", [parse_term("group(t1)")])
    for i in range(20):
        net.send("a", "b", atom(f"m{i}"))
    net.drain()
    assert [to_text(m) for _, m in b.delivered] == [f"m{i}" for i in range(20)]


def test_deliver_next_on_empty_network_is_noop():
    net = Network()
    assert net.deliver_next() is False


@pytest.mark.parametrize("path", SCENARIOS, ids=lambda p: p.stem)
def test_fixture_traces_are_pinned(path):
    trace, _ = run_file(path)
    pinned = (FIXTURES / "traces" / f"{path.stem}.trace").read_text(encoding="utf-8")
    assert trace.dumps() == pinned


@pytest.mark.parametrize("path", sorted((FIXTURES / "traces").glob("*.trace")), ids=lambda p: p.stem)
def test_pinned_traces_pass_the_full_suite(path):
    report = check_trace(Trace.load(path))
    assert report.ok, report.details()


def test_seeds_change_interleaving_not_outcomes():
    s = community_scenario(30, 3, seed=0, subscriptions=3, publishes=10, dms=30, searches=2)
    orders, outcomes = set(), set()
    for seed in range(10):
        t = run_scenario(s, seed=seed)
        orders.add(tuple(e.args[0] for e in t if e.functor == "hop"))
        r = check_trace(t)
        assert r.ok, r.details()
        outcomes.add(tuple(r[n].passed for n in CHECKS))
    assert len(orders) > 1 and len(outcomes) == 1


def test_socket_transport_is_bit_exact():
    path = FIXTURES / "scenarios" / "smoke.scn"
    a, _ = run_file(path)
    b, _ = run_file(path, transport="socket")
    assert a.entries[1:] == b.entries[1:]  # only the boot line names the transport


def test_trace_file_round_trip(tmp_path):
    trace, _ = run_file(FIXTURES / "scenarios" / "lifecycle.scn")
    trace.save(tmp_path / "t.trace")
    again = Trace.load(tmp_path / "t.trace")
    assert again.entries == trace.entries
    assert check_trace(again).to_tsv() == check_trace(trace).to_tsv()


def test_drain_leaves_nothing_pending():
    _, net = run_file(FIXTURES / "scenarios" / "smoke.scn")
    assert net.pending == 0


def test_conservation_tally():
    r = check_trace(Trace.load(FIXTURES / "traces" / "two_law.trace"))
    t = r.tally
    outcomes = sum(t.get(k, 0) for k in ("delivered", "discarded", "dropped"))
    assert t["envelopes"] == outcomes
    assert t["dropped_trust"] == 3


# ---------------------------------------------------------------- corrupted traces


def corrupt(name, find, replace):
    lines = (FIXTURES / "traces" / f"{name}.trace").read_text().splitlines()
    hits = [i for i, line in enumerate(lines) if find in line]
    assert hits, find
    i = hits[0]
    lines[i] = lines[i].replace(find, replace)
    return Trace.loads("\n".join(lines)), i


def test_cross_group_direct_message_scenario_passes_isolation():
    r = check_trace(Trace.load(FIXTURES / "traces" / "r15_dm_arrived.trace"), ["group_isolation"])
    assert r.ok


def test_forged_cross_group_delivery_is_caught():
    t, i = corrupt("r15_dm_arrived", "carol), env(2), [], [], dm_arrived",
                   "carol), env(2), [deliver(alice, hello, carol)], [], dm_arrived")
    r = check_trace(t)
    assert not r["group_isolation"].passed
    assert r["group_isolation"].indices == [i]


def test_forged_state_change_is_caught():
    t, i = corrupt("r03_add_profile", "snapshot(c1, bob, true, [group(t1), interest(chess)]",
                   "snapshot(c1, bob, true, [group(t1), interest(chess), role(manager)]")
    r = check_trace(t)
    assert r["state_custody"].indices == [i]


def test_forged_management_post_is_caught():
    t, _ = corrupt("r10_publish", 'publish(post(#management#, "coup")), bob), none, [], []',
                   'publish(post(#management#, "coup")), bob), none, [forward(bob, post(id(bob, 9), bob, '
                   '#management#, "coup"), alice)], []')
    assert not check_trace(t)["management_gating"].passed


def test_lost_envelope_breaks_conservation():
    lines = (FIXTURES / "traces" / "r14_dm_sent.trace").read_text().splitlines()
    kept = [line for line in lines if not line.startswith("eval(c2, bob, arrived")]
    kept = [line for line in kept if not line.startswith("deliver(")]
    r = check_trace(Trace.loads("\n".join(kept)))
    assert not r["conservation"].passed


def test_suite_selection():
    t = Trace.load(FIXTURES / "traces" / "smoke.trace")
    r = check_trace(t, ["trust", "names"])
    assert list(r.results) == ["trust", "names"]
    with pytest.raises(ValueError):
        check_trace(t, ["nonsense"])


# ---------------------------------------------------------------- scenario format


@pytest.mark.parametrize("text, needle", [
    ("frobnicate(alice)", "unknown"),
    ("adopt(alice, [group(t1)])\nseed(3)", "after the first step"),
    ("adopt(alice, [group(t1)]", "line 1"),
    ("seed(x)", "malformed"),
])
def test_malformed_scenarios(text, needle):
    with pytest.raises(ScenarioError, match=needle):
        parse_scenario(text)


def test_unknown_agent_is_an_error():
    with pytest.raises(ScenarioError, match="unknown agent"):
        run_scenario(parse_scenario("dm(ghost, bob, hi)"))


def test_scenario_text_round_trip():
    s = parse_scenario((FIXTURES / "scenarios" / "lifecycle.scn").read_text())
    again = parse_scenario(s.text())
    assert again.steps == s.steps and again.seed == s.seed and again.domains == s.domains


def test_workload_generator_is_seeded():
    a = community_scenario(20, 3, seed=5, publishes=5)
    b = community_scenario(20, 3, seed=5, publishes=5)
    assert a.text() == b.text()
    assert random.Random(5).random() == random.Random(5).random()
