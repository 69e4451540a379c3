from pathlib import Path

import pytest

from lgiosc.laws import builtin_law
from lgiosc.simnet import Network, load_scenario, run_scenario

FIXTURES = Path(__file__).parent / "fixtures"
RULES = FIXTURES / "rules"


def run_file(path, seed=None, transport="sim"):
    nets = []
    trace = run_scenario(load_scenario(path), seed=seed, transport=transport, network=nets)
    return trace, nets[0]


def evals(trace, rule=None):
    out = []
    for e in trace:
        if e.functor == "eval" and (rule is None or (e.args[6].functor == rule)):
            out.append(e)
    return out


@pytest.fixture(scope="session")
def be():
    return builtin_law("be")


@pytest.fixture
def net(be):
    n = Network(seed=1)
    n.add_law("be", be)
    yield n
    n.close()


def graph_network(names, edges, seed=0, publish=True):
    """Members in one group; each (a, b) edge is a subscription of a to b."""
    from lgiosc.terms import atom, parse_term

    n = Network(seed=seed)
    n.add_law("be", builtin_law("be"))
    for x in names:
        n.adopt(x, [parse_term("group(t1)")])
    for a, b in sorted(edges):
        n.send(a, atom(b), atom("requestSubscribe"))
    n.drain()
    if publish:
        for x in names:
            n.send(x, atom(x), parse_term(f'publish(post(#tech#, "from {x}"))'))
        n.drain()
    return n


def random_graph(rng, max_nodes=30):
    n = rng.randint(5, max_nodes)
    names = [f"n{i:02d}" for i in range(n)]
    edges = {(names[i], names[rng.randrange(i)]) for i in range(1, n)}
    for _ in range(rng.randint(0, n)):
        a, b = rng.sample(names, 2)
        if (b, a) not in edges:
            edges.add((a, b))
    return names, edges


# one line per acceptance criterion, echoed at the end of the session
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
