"""d-separation and the do-calculus Rule 2 / Rule 3 premises.

The blocking test runs on the latent-expanded graph via the standard
reachability closure (Koller & Friedman's reachable-set procedure);
an explicit path enumerator is kept as a test oracle for tiny graphs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Set, Tuple

from .graph import (CausalGraph, ExpandedGraph, NodeSet, expanded_ancestors,
                    latent_expand, mutilate)


@dataclass(frozen=True)
class RulePremiseQuery:
    """Premise (b ⊥ a | h-hat, i) tested on a mutilated graph."""
    b: NodeSet
    a: NodeSet
    h: NodeSet
    i: NodeSet = frozenset()

    def __post_init__(self):
        sets = [self.b, self.a, self.h, self.i]
        for k in range(len(sets)):
            for m in range(k + 1, len(sets)):
                if sets[k] & sets[m]:
                    raise ValueError("premise sets must be pairwise disjoint")


def d_separated(graph: ExpandedGraph, A: NodeSet, B: NodeSet,
                Z: NodeSet) -> bool:
    """True iff every path from A to B is blocked given Z.

    A collider is open iff it or one of its descendants is in Z.
    Vacuously true when A or B is empty.
    """
    if not A or not B:
        return True
    if A & B:
        return False
    # Nodes with a descendant in Z (inclusive).
    z_anc = set(Z)
    pa: Dict[str, List[str]] = {n: [] for n in graph.nodes}
    ch: Dict[str, List[str]] = {n: [] for n in graph.nodes}
    for p, c in graph.directed_edges:
        pa[c].append(p)
        ch[p].append(c)
    stack = list(Z)
    while stack:
        n = stack.pop()
        for p in pa[n]:
            if p not in z_anc:
                z_anc.add(p)
                stack.append(p)
    # Reachability over (node, direction) states; direction is how we
    # arrived: 'up' = via an edge out of the node (from a child),
    # 'down' = via an edge into the node (from a parent).
    start = [(a, "up") for a in A]
    seen: Set[Tuple[str, str]] = set(start)
    stack = list(start)
    while stack:
        n, d = stack.pop()
        if n in B:
            return False
        moves = []
        if d == "up":
            if n not in Z:
                moves += [(p, "up") for p in pa[n]]
                moves += [(c, "down") for c in ch[n]]
        else:  # arrived from a parent
            if n in z_anc:
                moves += [(p, "up") for p in pa[n]]  # collider opens
            if n not in Z:
                moves += [(c, "down") for c in ch[n]]
        for mv in moves:
            if mv not in seen:
                seen.add(mv)
                stack.append(mv)
    return True


def d_separated_paths(graph: ExpandedGraph, A: NodeSet, B: NodeSet,
                      Z: NodeSet) -> bool:
    """Path-enumeration oracle; exponential, for graphs of ~10 nodes."""
    if not A or not B:
        return True
    if A & B:
        return False
    adj: Dict[str, List[Tuple[str, str]]] = {n: [] for n in graph.nodes}
    for p, c in graph.directed_edges:
        adj[p].append((c, "fwd"))
        adj[c].append((p, "bwd"))
    desc_in_z = set(Z)
    changed = True
    while changed:
        changed = False
        for p, c in graph.directed_edges:
            if c in desc_in_z and p not in desc_in_z:
                desc_in_z.add(p)
                changed = True

    def walk(node: str, arrived_fwd: bool, visited: frozenset) -> bool:
        if node in B:
            return True
        for nxt, kind in adj[node]:
            if nxt in visited:
                continue
            leaving_fwd = kind == "fwd"
            if arrived_fwd and not leaving_fwd:
                open_ = node in desc_in_z  # collider
            else:
                open_ = node not in Z
            if open_ and walk(nxt, leaving_fwd, visited | {nxt}):
                return True
        return False

    for a in A:
        for nxt, kind in adj[a]:
            if walk(nxt, kind == "fwd", frozenset({a, nxt})):
                return False
    return True


def rule2_premise(graph: CausalGraph, q: RulePremiseQuery) -> bool:
    """Premise of Rule 2: b ⊥ a | h ∪ i in the graph with edges into h
    and out of a removed.  When true, conditioning on a replaces do(a)."""
    exp = latent_expand(graph)
    mut = mutilate(exp, hat=q.h, vee=q.a)
    return d_separated(mut, q.b, q.a, q.h | q.i)


def rule3_premise(graph: CausalGraph, q: RulePremiseQuery) -> bool:
    """Premise of Rule 3: b ⊥ a | h ∪ i after additionally hatting
    a-minus = a less the ancestors of i in the h-mutilated graph.
    When true, do(a) can be dropped."""
    exp = latent_expand(graph)
    hat_h = mutilate(exp, hat=q.h, vee=frozenset())
    a_minus = q.a - expanded_ancestors(hat_h, q.i)
    mut = mutilate(exp, hat=q.h | a_minus, vee=frozenset())
    return d_separated(mut, q.b, q.a, q.h | q.i)
