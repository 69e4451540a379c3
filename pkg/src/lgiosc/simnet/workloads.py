"""Randomized community workloads for the larger scenario runs."""

from __future__ import annotations

import random

from ..terms import parse_term
from .scenario import Scenario


def member_names(n: int) -> list[str]:
    width = max(3, len(str(n - 1)))
    return [f"m{i:0{width}d}" for i in range(n)]


def assign_groups(names, groups: int, rng: random.Random, max_per_member: int = 2) -> dict[str, list[str]]:
    tags = [f"g{k + 1}" for k in range(groups)]
    return {n: sorted(rng.sample(tags, rng.randint(1, max_per_member))) for n in names}


def community_scenario(
    members: int = 200,
    groups: int = 5,
    seed: int = 0,
    subscriptions: int = 3,
    publishes: int = 50,
    dms: int = 0,
    searches: int = 3,
    revoke: bool = True,
    search_ttl: int = 2,
    search_threshold: int = 3,
) -> Scenario:
    """A manager plus ``members - 1`` ordinary members doing the usual things.

    Member ``m000`` is the manager. After the revocation (if any) the revoked
    member tries to publish, is messaged, and tries to re-adopt.
    """
    rng = random.Random(seed)
    names = member_names(members)
    gmap = assign_groups(names, groups, rng)
    lines = []
    for n in names:
        attrs = [f"group({g})" for g in gmap[n]]
        if n == names[0]:
            attrs.append("role(manager)")
        lines.append(f"adopt({n}, [{', '.join(attrs)}])")
    for n in names:
        for target in rng.sample([m for m in names if m != n], min(subscriptions, members - 1)):
            lines.append(f"subscribe({n}, {target})")
    lines.append("drain")
    for k in range(publishes):
        who = rng.choice(names)
        ptype = rng.choice(["#tech#", "#social#", "#management#"])
        lines.append(f'publish({who}, {ptype}, "post {k}")')
    for _ in range(dms):
        a, b = rng.sample(names, 2)
        lines.append(f"dm({a}, {b}, hello)")
    lines.append("drain")
    for _ in range(searches):
        lines.append(f"search({rng.choice(names)}, post(_, _, _, _), {search_ttl}, {search_threshold})")
    lines.append("drain")
    if revoke and members > 1:
        victim = rng.choice(names[1:])
        lines.append(f"revoke({names[0]}, {victim})")
        lines.append("drain")
        lines.append(f'publish({victim}, #tech#, "still here?")')
        lines.append(f"dm({names[0]}, {victim}, ping)")
        lines.append(f"readopt({victim})")
        lines.append("drain")
    return Scenario(seed=seed, laws=[("be", parse_term("be"))],
                    steps=[parse_term(line) for line in lines])
