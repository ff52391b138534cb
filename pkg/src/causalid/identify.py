"""Identification of interventional queries on semi-Markovian graphs.

The single-intervention routine iterates a pie decomposition: split
the query across confounding components, expand the components that
avoid the intervened node into observed chain factors, and test the
do-calculus Rule 2 / Rule 3 premises on the component holding the
intervention.  On failure the graph is pruned to the ancestral closure
and the iteration descends into that component; the descent fails when
the outcome block is itself a confounding component of the d-induced
graph, or when an expansion would have to reference context outside
the query and its summation variables.

Multi-intervention queries decompose per component and dispatch each
block by its intervention count.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

from . import estimand as E
from .dsep import RulePremiseQuery, rule2_premise, rule3_premise
from .graph import (CausalGraph, NodeId, NodeSet, ancestral_closure,
                    c_components, induced_subgraph, topological_order)


class InvalidBlock(ValueError):
    """gamma_block is not a c-component of the induced subgraph."""


class IdentifyError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Level observed distributions


class LevelObserved:
    """Distribution the current recursion level treats as observed."""
    scope: NodeSet

    def order(self, graph: CausalGraph, h: NodeSet) -> List[NodeId]:
        raise NotImplementedError

    def chain_factor(self, node: NodeId, given: Sequence[Tuple[str, E.Ref]],
                     full_prefix: Sequence[NodeId]) -> E.Estimand:
        raise NotImplementedError

    def marginalized(self, drop: NodeSet) -> "LevelObserved":
        raise NotImplementedError

    def marginal_estimand(self, keep: NodeSet) -> E.Estimand:
        raise NotImplementedError


@dataclass
class MarginalObserved(LevelObserved):
    """A marginal of the global observed joint."""
    scope: NodeSet

    def order(self, graph: CausalGraph, h: NodeSet) -> List[NodeId]:
        return topological_order(graph, h)

    def chain_factor(self, node, given, full_prefix):
        return E.conditional([(node, node)], given)

    def marginalized(self, drop: NodeSet) -> "MarginalObserved":
        return MarginalObserved(self.scope - drop)

    def marginal_estimand(self, keep: NodeSet) -> E.Estimand:
        return E.conditional([(v, v) for v in sorted(keep)], [])


@dataclass
class ChainObserved(LevelObserved):
    """Product of stored per-node conditionals in a fixed chain order.

    The chain conditional of a node on its stored prefix is the stored
    factor itself; anything else falls back to sum ratios.
    """
    scope: NodeSet
    factors: Dict[NodeId, E.Estimand]
    chain: Tuple[NodeId, ...]

    def order(self, graph: CausalGraph, h: NodeSet) -> List[NodeId]:
        return [n for n in self.chain if n in h]

    def as_estimand(self) -> E.Estimand:
        return E.product(self.factors[n] for n in self.chain)

    def chain_factor(self, node, given, full_prefix):
        return self.factors[node]

    def marginalized(self, drop: NodeSet) -> "LevelObserved":
        if not drop:
            return self
        chain = list(self.chain)
        factors = dict(self.factors)
        todo = set(drop)
        # telescope from the tail where the dropped node is unused
        changed = True
        while todo and changed:
            changed = False
            for n in list(todo):
                later = [m for m in chain if m != n and
                         n in {r for r in E.refs_of(factors[m])
                               if isinstance(r, str)}]
                if chain and chain[-1] == n and not later:
                    chain.pop()
                    factors.pop(n)
                    todo.discard(n)
                    changed = True
        if not todo:
            return ChainObserved(self.scope - drop, factors, tuple(chain))
        est = E.marginalize(sorted(todo),
                            E.product(factors[n] for n in chain))
        return OpaqueObserved(self.scope - drop, est,
                              tuple(n for n in chain if n not in todo))

    def marginal_estimand(self, keep: NodeSet) -> E.Estimand:
        drop = self.scope - keep
        return E.marginalize(sorted(drop), self.as_estimand())


@dataclass
class OpaqueObserved(LevelObserved):
    """Arbitrary estimand-valued distribution over its scope."""
    scope: NodeSet
    est: E.Estimand
    chain: Tuple[NodeId, ...]

    def order(self, graph: CausalGraph, h: NodeSet) -> List[NodeId]:
        return [n for n in self.chain if n in h]

    def chain_factor(self, node, given, full_prefix):
        pre = set(full_prefix)
        num = E.marginalize(sorted(self.scope - pre - {node}), self.est)
        den = E.marginalize(sorted(self.scope - pre), self.est)
        return E.ratio(num, den)

    def marginalized(self, drop: NodeSet) -> "LevelObserved":
        if not drop:
            return self
        return OpaqueObserved(self.scope - drop,
                              E.marginalize(sorted(drop), self.est),
                              tuple(n for n in self.chain if n not in drop))

    def marginal_estimand(self, keep: NodeSet) -> E.Estimand:
        return E.marginalize(sorted(self.scope - keep), self.est)


# ---------------------------------------------------------------------------
# Traces


@dataclass(frozen=True)
class TraceStep:
    sigma: NodeSet
    beta: NodeSet
    d: NodeSet
    component: NodeSet  # the block holding the intervention
    dcomp: NodeSet      # its share of d
    action: str         # rule2 | rule3 | prune | fail


@dataclass(frozen=True)
class Identifiable:
    estimand: E.Estimand


@dataclass(frozen=True)
class NotIdentifiable:
    witness_d: NodeSet
    witness_graph: CausalGraph
    reason: str = ""


@dataclass(frozen=True)
class IdentifyTrace:
    steps: Tuple[TraceStep, ...]
    verdict: Union[Identifiable, NotIdentifiable]

    @property
    def identifiable(self) -> bool:
        return isinstance(self.verdict, Identifiable)


# ---------------------------------------------------------------------------
# Q-chain expansion (Lemma-4 style chains over the level observed)


def q_chain_expand(graph: CausalGraph, h: NodeSet, gamma_block: NodeSet,
                   observed: Optional[LevelObserved] = None) -> E.Estimand:
    """Chain-factor product for one c-component of the induced graph.

    Factors are conditionals of the caller-supplied observed
    distribution on the full topological prefix; a node with no arcs
    inside the block's graph conditions only on its parents there.
    Factors appear latest-node-first.
    """
    g_h = induced_subgraph(graph, h)
    comps = c_components(g_h)
    if frozenset(gamma_block) not in comps:
        raise InvalidBlock(f"{sorted(gamma_block)} is not a c-component "
                           f"of the induced graph on {sorted(h)}")
    if observed is None:
        observed = MarginalObserved(frozenset(h))
    order = observed.order(g_h, frozenset(h))
    factors: List[E.Estimand] = []
    for pos, node in enumerate(order):
        if node not in gamma_block:
            continue
        prefix = order[:pos]
        if isinstance(observed, MarginalObserved) and \
                not g_h.arc_neighbors(node):
            given_nodes = sorted(g_h.parents(node))
        else:
            given_nodes = prefix
        given = [(p, p) for p in given_nodes]
        factors.append(observed.chain_factor(node, given, prefix))
    factors.reverse()
    return E.product(factors)


# ---------------------------------------------------------------------------
# Pie decomposition


@dataclass(frozen=True)
class UpsilonPieces:
    d: NodeSet
    component: NodeSet                  # block containing t
    dcomp: NodeSet                      # d restricted to that block
    other_blocks: Tuple[Tuple[NodeSet, NodeSet], ...]  # (d_gamma, block)


def upsilon_decompose(graph: CausalGraph, sigma: NodeSet, t: NodeId,
                      beta: NodeSet) -> UpsilonPieces:
    """Split P(sigma | do(t)) across the c-components of the induced
    graph on beta; d is the ancestral closure of sigma avoiding t."""
    sigma, beta = frozenset(sigma), frozenset(beta)
    if not sigma | {t} <= beta:
        raise IdentifyError("sigma and t must lie within beta")
    if t in sigma:
        raise IdentifyError("t cannot be in sigma")
    g_b = induced_subgraph(graph, beta)
    d = ancestral_closure(g_b, sigma, beta - {t})
    comps = c_components(g_b)
    comp_t = next(c for c in comps if t in c)
    others = tuple((frozenset(d & c), c) for c in comps if c != comp_t)
    return UpsilonPieces(d, comp_t, frozenset(d & comp_t), others)


def _guard_refs(expr: E.Estimand, forbidden: NodeSet) -> Optional[NodeSet]:
    bad = frozenset(r for r in E.refs_of(expr)
                    if isinstance(r, str) and r in forbidden)
    return bad or None


def _pin_refs(expr: E.Estimand, pins: NodeSet) -> E.Estimand:
    """Replace references to provably inert context variables by the
    reference state 0."""
    if isinstance(expr, E.Cond):
        def sub(slots):
            return tuple((v, 0 if r in pins else r) for v, r in slots)
        return E.Cond(sub(expr.target), sub(expr.given))
    if isinstance(expr, E.Prod):
        return E.Prod(tuple(_pin_refs(f, pins) for f in expr.factors))
    if isinstance(expr, E.Marg):
        return E.Marg(expr.vars, _pin_refs(expr.body, pins - set(expr.vars)))
    if isinstance(expr, E.Ratio):
        return E.Ratio(_pin_refs(expr.num, pins), _pin_refs(expr.den, pins))
    raise TypeError(type(expr))


def pv_express_one(graph: CausalGraph, sigma: NodeSet, t: NodeId,
                   beta: NodeSet,
                   observed: Optional[LevelObserved] = None,
                   free: Optional[NodeSet] = None) -> IdentifyTrace:
    """Express P(sigma | do(t)) over the observed distribution, or
    certify failure with the blocking (outcome set, graph) pair."""
    sigma, beta = frozenset(sigma), frozenset(beta)
    if observed is None:
        observed = MarginalObserved(beta)
    if free is None:
        free = sigma | {t}
    steps: List[TraceStep] = []
    pending: List[Tuple[Tuple[str, ...], List[E.Estimand]]] = []
    seen_states = set()

    def fold(core: E.Estimand) -> E.Estimand:
        for sumvars, blocks in reversed(pending):
            core = E.marginalize(sumvars, E.product([core] + blocks))
        return core

    while True:
        if (sigma, beta) in seen_states:
            g_b = induced_subgraph(graph, beta)
            return IdentifyTrace(tuple(steps), NotIdentifiable(
                sigma, g_b, "no progress"))
        seen_states.add((sigma, beta))
        g_b = induced_subgraph(graph, beta)
        pieces = upsilon_decompose(graph, sigma, t, beta)
        d, V, D = pieces.d, pieces.component, pieces.dcomp
        inert = beta - d - {t}

        block_exprs: List[E.Estimand] = []
        block_bad: Optional[NodeSet] = None
        for dg, C in pieces.other_blocks:
            if not dg:
                continue
            qc = q_chain_expand(graph, beta, C, observed)
            sumvars, body = E.bound_var_rename(sorted(C - dg), qc, free)
            expr = E.marginalize(sumvars, body)
            bad = _guard_refs(expr, inert)
            if bad and block_bad is None:
                block_bad = bad
            block_exprs.append(expr)

        q = RulePremiseQuery(b=D, a=frozenset({t}), h=beta - V)
        ok2 = rule2_premise(g_b, q)
        ok3 = False if ok2 else rule3_premise(g_b, q)

        if ok2 or ok3:
            if block_bad:
                return IdentifyTrace(
                    tuple(steps) + (TraceStep(sigma, beta, d, V, D, "fail"),),
                    NotIdentifiable(D, g_b,
                                    f"block references pruned context "
                                    f"{sorted(block_bad)}"))
            action = "rule2" if ok2 else "rule3"
            steps.append(TraceStep(sigma, beta, d, V, D, action))
            if not D:
                ups3: E.Estimand = E.ONE
            else:
                qv = q_chain_expand(graph, beta, V, observed)
                if ok3:
                    sumvars, body = E.bound_var_rename(sorted(V - D), qv,
                                                       free)
                    ups3 = E.marginalize(sumvars, body)
                else:
                    sumvars, body = E.bound_var_rename(
                        sorted(V - D - {t}), qv, free)
                    num = E.marginalize(sumvars, body)
                    dvars, dbody = E.bound_var_rename(
                        sorted(D), num, free | set(sumvars))
                    ups3 = E.ratio(num, E.marginalize(dvars, dbody))
                ups3 = _pin_refs(ups3, inert)
            core = E.marginalize(sorted(d - sigma),
                                 E.product([ups3] + block_exprs))
            return IdentifyTrace(tuple(steps), Identifiable(fold(core)))

        # both rules failed: prune, check for a dead end, descend
        bminus = ancestral_closure(g_b, sigma | {t}, beta)
        steps.append(TraceStep(sigma, beta, d, V, D, "prune"))
        d_graph = induced_subgraph(graph, d)
        if frozenset(D) in c_components(d_graph) if D else False:
            return IdentifyTrace(
                tuple(steps) + (TraceStep(sigma, beta, d, V, D, "fail"),),
                NotIdentifiable(D, induced_subgraph(graph, bminus),
                                "outcome block is a confounding component"))
        if block_bad:
            return IdentifyTrace(
                tuple(steps) + (TraceStep(sigma, beta, d, V, D, "fail"),),
                NotIdentifiable(D, g_b,
                                f"block references pruned context "
                                f"{sorted(block_bad)}"))
        pending.append((tuple(sorted(d - sigma)), block_exprs))
        new_beta = V & bminus
        if V == beta:
            observed = observed.marginalized(beta - bminus)
        else:
            chain_order = [n for n in observed.order(g_b, beta) if n in V]
            factors: Dict[NodeId, E.Estimand] = {}
            bad_chain: Optional[NodeSet] = None
            qv_all = q_chain_expand(graph, beta, V, observed)
            bad_chain = _guard_refs(qv_all, inert)
            if bad_chain:
                return IdentifyTrace(
                    tuple(steps) + (TraceStep(sigma, beta, d, V, D,
                                              "fail"),),
                    NotIdentifiable(D, g_b,
                                    f"component chain references pruned "
                                    f"context {sorted(bad_chain)}"))
            g_bb = induced_subgraph(graph, beta)
            order = observed.order(g_bb, beta)
            for pos, node in enumerate(order):
                if node not in V:
                    continue
                prefix = order[:pos]
                if isinstance(observed, MarginalObserved) and \
                        not g_bb.arc_neighbors(node):
                    given_nodes = sorted(g_bb.parents(node))
                else:
                    given_nodes = prefix
                factors[node] = observed.chain_factor(
                    node, [(p, p) for p in given_nodes], prefix)
            observed = ChainObserved(V, factors,
                                     tuple(chain_order)).marginalized(
                                         V - new_beta)
        sigma, beta = D, frozenset(new_beta)


def pv_express(graph: CausalGraph, sigma: NodeSet, t: NodeSet,
               beta: NodeSet,
               observed: Optional[LevelObserved] = None,
               free: Optional[NodeSet] = None) -> IdentifyTrace:
    """General entry point: handles empty, singleton, and compound
    intervention sets."""
    sigma, t, beta = frozenset(sigma), frozenset(t), frozenset(beta)
    if sigma & t:
        raise IdentifyError("sigma and t must be disjoint")
    if not sigma | t <= beta:
        raise IdentifyError("sigma and t must lie within beta")
    if observed is None:
        observed = MarginalObserved(beta)
    if free is None:
        free = sigma | t
    if not t:
        step = TraceStep(sigma, beta, sigma, frozenset(), frozenset(),
                         "rule3")
        return IdentifyTrace((step,), Identifiable(
            observed.marginal_estimand(sigma)))
    if len(t) == 1:
        (t1,) = t
        return pv_express_one(graph, sigma, t1, beta, observed, free)

    g_b = induced_subgraph(graph, beta)
    bminus = ancestral_closure(g_b, sigma | t, beta)
    steps: List[TraceStep] = []
    if bminus != beta:
        steps.append(TraceStep(sigma, beta, bminus, frozenset(),
                               frozenset(), "prune"))
        observed = observed.marginalized(beta - bminus)
        beta = bminus
        g_b = induced_subgraph(graph, beta)
    d = ancestral_closure(g_b, sigma, beta - t)
    inert = beta - d - t
    comps = c_components(g_b)
    block_exprs: List[E.Estimand] = []
    for C in comps:
        dg, tg = d & C, t & C
        if not dg:
            continue
        if not tg:
            qc = q_chain_expand(graph, beta, C, observed)
            sumvars, body = E.bound_var_rename(sorted(C - dg), qc, free)
            expr = E.marginalize(sumvars, body)
            bad = _guard_refs(expr, inert)
            if bad:
                return IdentifyTrace(
                    tuple(steps) + (TraceStep(sigma, beta, d, C, dg,
                                              "fail"),),
                    NotIdentifiable(dg, g_b,
                                    f"block references pruned context "
                                    f"{sorted(bad)}"))
            block_exprs.append(expr)
            continue
        chain_order = [n for n in observed.order(g_b, beta) if n in C]
        qv_all = q_chain_expand(graph, beta, C, observed)
        bad = _guard_refs(qv_all, inert)
        if bad:
            return IdentifyTrace(
                tuple(steps) + (TraceStep(sigma, beta, d, C, dg, "fail"),),
                NotIdentifiable(dg, g_b,
                                f"component chain references pruned "
                                f"context {sorted(bad)}"))
        order = observed.order(g_b, beta)
        factors: Dict[NodeId, E.Estimand] = {}
        for pos, node in enumerate(order):
            if node not in C:
                continue
            prefix = order[:pos]
            if isinstance(observed, MarginalObserved) and \
                    not g_b.arc_neighbors(node):
                given_nodes = sorted(g_b.parents(node))
            else:
                given_nodes = prefix
            factors[node] = observed.chain_factor(
                node, [(p, p) for p in given_nodes], prefix)
        sub_obs = ChainObserved(C, factors, tuple(chain_order))
        if len(tg) == 1:
            (t1,) = tg
            sub = pv_express_one(graph, dg, t1, C, sub_obs, free)
        else:
            sub = pv_express(graph, dg, tg, C, sub_obs, free)
        steps.extend(sub.steps)
        if not sub.identifiable:
            return IdentifyTrace(tuple(steps), sub.verdict)
        block_exprs.append(sub.verdict.estimand)
    if not steps or steps[-1].action not in ("rule2", "rule3"):
        steps.append(TraceStep(sigma, beta, d, frozenset(), frozenset(),
                               "rule3"))
    core = E.marginalize(sorted(d - sigma), E.product(block_exprs))
    return IdentifyTrace(tuple(steps), Identifiable(core))


def graphical_condition(graph: CausalGraph, s: NodeSet, t: NodeId) -> bool:
    """True iff the rule-test sequence for P(s | do(t)) terminates in a
    successful Rule 2 or Rule 3 application."""
    trace = pv_express_one(graph, frozenset(s), t, graph.visible)
    return trace.identifiable


def prune_query(graph: CausalGraph, s: NodeSet, t: NodeSet,
                beta: NodeSet) -> NodeSet:
    """Ancestral closure of the query, with the singleton-intervention
    refinement: a singleton t outside the closure of s is irrelevant
    and the closure of s alone suffices."""
    s, t, beta = frozenset(s), frozenset(t), frozenset(beta)
    g_b = induced_subgraph(graph, beta)
    if len(t) == 1:
        c = ancestral_closure(g_b, s, beta)
        return c
    return ancestral_closure(g_b, s | t, beta)
