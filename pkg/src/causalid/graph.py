"""Semi-Markovian causal graphs and their structural algorithms.

A graph has visible nodes, directed edges among them, and bidirected
arcs.  Each arc stands for a hidden root variable with exactly two
visible children; arcs stay first-class until inference or
d-separation needs the explicit latent via :func:`latent_expand`.

All operations are pure and all containers are immutable, so graphs
are safe to share across threads.  Iteration order is deterministic
everywhere (lexicographic tie-breaks) to keep downstream expression
construction reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Sequence, Tuple

NodeId = str
NodeSet = FrozenSet[NodeId]

_NAME_OK = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_")


class GraphError(ValueError):
    """Base class for graph validation failures."""


class CycleDetected(GraphError):
    def __init__(self, cycle: Sequence[NodeId]):
        self.cycle = list(cycle)
        super().__init__("directed cycle: " + " -> ".join(self.cycle))


class DanglingNode(GraphError):
    pass


class DuplicateEdge(GraphError):
    pass


def nodeset(items: Iterable[NodeId] = ()) -> NodeSet:
    return frozenset(items)


def sorted_nodes(s: Iterable[NodeId]) -> List[NodeId]:
    return sorted(s)


@dataclass(frozen=True)
class CausalGraph:
    visible: NodeSet
    directed_edges: Tuple[Tuple[NodeId, NodeId], ...]
    bidirected_arcs: Tuple[Tuple[NodeId, NodeId], ...]

    @staticmethod
    def make(nodes: Iterable[NodeId],
             directed: Iterable[Tuple[NodeId, NodeId]] = (),
             arcs: Iterable[Tuple[NodeId, NodeId]] = ()) -> "CausalGraph":
        """Build and validate a graph; arc endpoint order is normalized."""
        vis = frozenset(nodes)
        d = tuple(directed)
        a = tuple(tuple(sorted(pair)) for pair in arcs)
        g = CausalGraph(vis, d, a)
        validate(g)
        return g

    def parents(self, node: NodeId) -> NodeSet:
        return frozenset(p for p, c in self.directed_edges if c == node)

    def children(self, node: NodeId) -> NodeSet:
        return frozenset(c for p, c in self.directed_edges if p == node)

    def arc_neighbors(self, node: NodeId) -> NodeSet:
        out = set()
        for a, b in self.bidirected_arcs:
            if a == node:
                out.add(b)
            elif b == node:
                out.add(a)
        return frozenset(out)


@dataclass(frozen=True)
class ExpandedGraph:
    """Visible graph plus one synthetic latent root per bidirected arc."""
    nodes: NodeSet
    directed_edges: Tuple[Tuple[NodeId, NodeId], ...]
    latent_of_arc: Tuple[Tuple[Tuple[NodeId, NodeId], NodeId], ...]
    visible: NodeSet

    def parents(self, node: NodeId) -> NodeSet:
        return frozenset(p for p, c in self.directed_edges if c == node)

    def children(self, node: NodeId) -> NodeSet:
        return frozenset(c for p, c in self.directed_edges if p == node)

    @property
    def latents(self) -> NodeSet:
        return self.nodes - self.visible


def validate(graph: CausalGraph) -> None:
    """Check graph invariants; raises a GraphError subclass on failure."""
    for n in graph.visible:
        if not n or not set(n) <= _NAME_OK:
            raise GraphError(f"bad node name: {n!r}")
    seen = set()
    for e in graph.directed_edges:
        p, c = e
        if p not in graph.visible or c not in graph.visible:
            raise DanglingNode(f"edge {p}->{c} uses unknown node")
        if p == c:
            raise CycleDetected([p, c])
        if e in seen:
            raise DuplicateEdge(f"duplicate edge {p}->{c}")
        seen.add(e)
    seen_arcs = set()
    for a, b in graph.bidirected_arcs:
        if a not in graph.visible or b not in graph.visible:
            raise DanglingNode(f"arc {a}<->{b} uses unknown node")
        if a == b:
            raise GraphError(f"arc endpoints must differ: {a}")
        key = tuple(sorted((a, b)))
        if key in seen_arcs:
            raise DuplicateEdge(f"duplicate arc {a}<->{b}")
        seen_arcs.add(key)
    _toposort(graph.visible, graph.directed_edges)  # raises CycleDetected


def _toposort(nodes: NodeSet,
              edges: Sequence[Tuple[NodeId, NodeId]]) -> List[NodeId]:
    """Kahn's algorithm with lexicographic tie-breaking."""
    import heapq

    indeg: Dict[NodeId, int] = {n: 0 for n in nodes}
    ch: Dict[NodeId, List[NodeId]] = {n: [] for n in nodes}
    for p, c in edges:
        if p in indeg and c in indeg:
            indeg[c] += 1
            ch[p].append(c)
    ready = [n for n, k in indeg.items() if k == 0]
    heapq.heapify(ready)
    out: List[NodeId] = []
    while ready:
        n = heapq.heappop(ready)
        out.append(n)
        for c in sorted(ch[n]):
            indeg[c] -= 1
            if indeg[c] == 0:
                heapq.heappush(ready, c)
    if len(out) != len(nodes):
        stuck = sorted(n for n, k in indeg.items() if k > 0)
        raise CycleDetected(stuck)
    return out


def topological_order(graph: CausalGraph, subset: NodeSet) -> List[NodeId]:
    """Linear extension of the induced subgraph, lexicographic ties."""
    if not subset <= graph.visible:
        raise GraphError("subset not within visible nodes")
    edges = [(p, c) for p, c in graph.directed_edges
             if p in subset and c in subset]
    return _toposort(frozenset(subset), edges)


def ancestral_closure(graph: CausalGraph, seed: NodeSet,
                      within: NodeSet) -> NodeSet:
    """Seed plus all directed ancestors inside the induced subgraph.

    Bidirected arcs contribute no ancestry.
    """
    if not seed <= within:
        raise GraphError("seed must lie within the closure scope")
    pa: Dict[NodeId, List[NodeId]] = {n: [] for n in within}
    for p, c in graph.directed_edges:
        if p in within and c in within:
            pa[c].append(p)
    out = set(seed)
    stack = list(seed)
    while stack:
        n = stack.pop()
        for p in pa[n]:
            if p not in out:
                out.add(p)
                stack.append(p)
    return frozenset(out)


def induced_subgraph(graph: CausalGraph, keep: NodeSet) -> CausalGraph:
    """Restriction to `keep`: edges and arcs with both endpoints kept."""
    return CausalGraph(
        frozenset(keep),
        tuple((p, c) for p, c in graph.directed_edges
              if p in keep and c in keep),
        tuple(a for a in graph.bidirected_arcs
              if a[0] in keep and a[1] in keep),
    )


def c_components(graph: CausalGraph) -> List[NodeSet]:
    """Partition of the visible nodes by bidirected-arc connectivity.

    Blocks are ordered by their least member.
    """
    parent: Dict[NodeId, NodeId] = {n: n for n in graph.visible}

    def find(x: NodeId) -> NodeId:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in graph.bidirected_arcs:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    blocks: Dict[NodeId, set] = {}
    for n in graph.visible:
        blocks.setdefault(find(n), set()).add(n)
    return sorted((frozenset(b) for b in blocks.values()), key=min)


def latent_expand(graph: CausalGraph) -> ExpandedGraph:
    """Replace each arc by a fresh root u_<i> with the two endpoints as
    children; i follows arc declaration order."""
    edges = list(graph.directed_edges)
    lat = []
    names = set(graph.visible)
    for i, (a, b) in enumerate(graph.bidirected_arcs):
        u = f"u_{i}"
        while u in names:
            u = "_" + u
        names.add(u)
        lat.append(((a, b), u))
        edges.append((u, a))
        edges.append((u, b))
    return ExpandedGraph(frozenset(names), tuple(edges), tuple(lat),
                         graph.visible)


def mutilate(graph: ExpandedGraph, hat: NodeSet, vee: NodeSet) -> ExpandedGraph:
    """Cut all edges into `hat` nodes and out of `vee` nodes."""
    if hat & vee:
        raise GraphError("hat and vee must be disjoint")
    edges = tuple((p, c) for p, c in graph.directed_edges
                  if c not in hat and p not in vee)
    return ExpandedGraph(graph.nodes, edges, graph.latent_of_arc,
                         graph.visible)


def expanded_ancestors(graph: ExpandedGraph, seed: NodeSet) -> NodeSet:
    """Seed plus directed ancestors in an expanded (possibly mutilated)
    graph; includes latents."""
    pa: Dict[NodeId, List[NodeId]] = {n: [] for n in graph.nodes}
    for p, c in graph.directed_edges:
        pa[c].append(p)
    out = set(seed)
    stack = list(seed)
    while stack:
        n = stack.pop()
        for p in pa[n]:
            if p not in out:
                out.add(p)
                stack.append(p)
    return frozenset(out)
