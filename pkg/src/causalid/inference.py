"""Exact enumeration over discrete models.

Dense tables, no sampling.  All information quantities are in nats.
Conventions applied uniformly: 0*ln(0) = 0 and 0/0 = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Tuple, Union

import numpy as np

from .estimand import Cond, Estimand, Marg, Prod, Ratio, free_vars
from .graph import CausalGraph, NodeId, NodeSet, latent_expand

STATE_CAP = 2 ** 24


class StateSpaceTooLarge(RuntimeError):
    pass


class ZeroDenominator(ArithmeticError):
    def __init__(self, where: str):
        super().__init__(f"zero denominator while evaluating {where}")


class SupportMismatch(ArithmeticError):
    """q(x) = 0 at a point where p(x) > 0; the divergence is +inf."""


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class JointTable:
    """Dense probability table over an ordered scope."""
    scope: Tuple[NodeId, ...]
    values: np.ndarray
    card: Tuple[int, ...]

    def axis(self, var: NodeId) -> int:
        return self.scope.index(var)

    def marginal(self, keep: Iterable[NodeId]) -> "JointTable":
        keep = [v for v in self.scope if v in set(keep)]
        drop = tuple(i for i, v in enumerate(self.scope) if v not in keep)
        vals = self.values.sum(axis=drop) if drop else self.values
        cards = tuple(self.card[self.scope.index(v)] for v in keep)
        return JointTable(tuple(keep), vals, cards)


@dataclass
class DiscreteModel:
    """CPTs over the latent-expanded graph.

    CPT axis 0 is the node's own state; remaining axes follow
    `parent_order(node)`: sorted visible parents, then synthetic
    latents in arc order.
    """
    graph: CausalGraph
    cardinality: Dict[NodeId, int]
    cpts: Dict[NodeId, np.ndarray]

    def __post_init__(self):
        self.expanded = latent_expand(self.graph)
        self._latent_order = [u for _, u in self.expanded.latent_of_arc]
        self.validate()

    def parent_order(self, node: NodeId) -> List[NodeId]:
        pa = self.expanded.parents(node)
        vis = sorted(p for p in pa if p in self.graph.visible)
        lat = [u for u in self._latent_order if u in pa]
        return vis + lat

    def node_order(self) -> List[NodeId]:
        return sorted(self.graph.visible) + list(self._latent_order)

    def validate(self) -> None:
        for node in self.node_order():
            if node not in self.cardinality:
                raise ModelError(f"no cardinality for {node}")
            if self.cardinality[node] < 2:
                raise ModelError(f"cardinality of {node} must be >= 2")
            cpt = self.cpts.get(node)
            if cpt is None:
                raise ModelError(f"no CPT for {node}")
            want = (self.cardinality[node],) + tuple(
                self.cardinality[p] for p in self.parent_order(node))
            if cpt.shape != want:
                raise ModelError(
                    f"CPT shape for {node}: {cpt.shape} != {want}")
            if cpt.min() < -1e-12 or cpt.max() > 1 + 1e-12:
                raise ModelError(f"CPT entries for {node} outside [0,1]")
            sums = cpt.sum(axis=0)
            if np.abs(sums - 1.0).max() > 1e-12:
                raise ModelError(f"CPT columns for {node} do not sum to 1")


def joint(model: DiscreteModel) -> JointTable:
    """Full product distribution over visible and latent nodes."""
    order = model.node_order()
    cards = [model.cardinality[n] for n in order]
    total = 1
    for c in cards:
        total *= c
        if total > STATE_CAP:
            raise StateSpaceTooLarge(f"{total} states exceeds cap")
    idx = {n: i for i, n in enumerate(order)}
    vals = np.ones(cards)
    for node in order:
        dims = [node] + model.parent_order(node)
        cpt = model.cpts[node]
        shape = [1] * len(order)
        perm_src = np.moveaxis(cpt, range(len(dims)),
                               sorted(range(len(dims)),
                                      key=lambda k: idx[dims[k]]))
        # Build a broadcastable view aligned with the global axis order.
        axes = sorted(idx[d] for d in dims)
        for a, c in zip(axes, perm_src.shape):
            shape[a] = c
        vals = vals * perm_src.reshape(shape)
    return JointTable(tuple(order), vals, tuple(cards))


def observed_marginal(model: DiscreteModel) -> JointTable:
    return joint(model).marginal(sorted(model.graph.visible))


def do_distribution(model: DiscreteModel, s: NodeSet,
                    t: NodeSet) -> JointTable:
    """P(s | do(t)) for every s,t state via truncated factorization.

    The returned scope is sorted(s) + sorted(t); values are normalized
    per t-state.
    """
    s, t = frozenset(s), frozenset(t)
    if s & t:
        raise ModelError("s and t must be disjoint")
    order = model.node_order()
    cards = [model.cardinality[n] for n in order]
    idx = {n: i for i, n in enumerate(order)}
    vals = np.ones(cards)
    for node in order:
        if node in t:
            continue  # clamp: drop the intervened node's mechanism
        dims = [node] + model.parent_order(node)
        cpt = model.cpts[node]
        perm_src = np.moveaxis(cpt, range(len(dims)),
                               sorted(range(len(dims)),
                                      key=lambda k: idx[dims[k]]))
        shape = [1] * len(order)
        axes = sorted(idx[d] for d in dims)
        for a, c in zip(axes, perm_src.shape):
            shape[a] = c
        vals = vals * perm_src.reshape(shape)
    keep = sorted(s) + sorted(t)
    drop = tuple(i for i, v in enumerate(order) if v not in set(keep))
    table = vals.sum(axis=drop) if drop else vals
    # reorder axes to keep-order
    cur = [v for v in order if v in set(keep)]
    table = np.moveaxis(table, [cur.index(v) for v in keep],
                        range(len(keep)))
    t_axes = tuple(range(len(s), len(keep)))
    if s:
        norm = table.sum(axis=tuple(range(len(s))), keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            table = np.where(norm > 0, table / np.where(norm == 0, 1, norm),
                             0.0)
    cards_keep = tuple(model.cardinality[v] for v in keep)
    return JointTable(tuple(keep), table, cards_keep)


def uprooted_component_prob(model: DiscreteModel,
                            a: NodeSet) -> Tuple[np.ndarray, List[NodeId]]:
    """Q[a]: latent-averaged product of the a-CPTs.

    Returns (array, dims) where dims = sorted(a) + sorted external
    visible parents; the array gives the probability of the a-states
    with everything else uprooted at the external parent values.
    """
    a = frozenset(a)
    ext = set()
    for n in a:
        ext |= set(p for p in model.graph.parents(n) if p not in a)
    lats = set()
    for n in a:
        lats |= set(p for p in model.expanded.parents(n)
                    if p not in model.graph.visible)
    dims = sorted(a) + sorted(ext) + [u for u in model._latent_order
                                      if u in lats]
    idx = {n: i for i, n in enumerate(dims)}
    cards = [model.cardinality[n] for n in dims]
    vals = np.ones(cards)
    for node in sorted(a):
        taxes = [node] + model.parent_order(node)
        cpt = model.cpts[node]
        keep_axes = [k for k, d in enumerate(taxes) if d in idx]
        cpt_v = cpt
        perm_src = np.moveaxis(cpt_v, range(len(taxes)),
                               sorted(range(len(taxes)),
                                      key=lambda k: idx[taxes[k]]))
        shape = [1] * len(dims)
        axes = sorted(idx[d] for d in taxes)
        for ax, c in zip(axes, perm_src.shape):
            shape[ax] = c
        vals = vals * perm_src.reshape(shape)
    for u in [u for u in model._latent_order if u in lats]:
        pu = model.cpts[u].reshape([model.cardinality[u] if d == u else 1
                                    for d in dims])
        vals = vals * pu
    lat_axes = tuple(idx[u] for u in dims if u not in model.graph.visible)
    if lat_axes:
        vals = vals.sum(axis=lat_axes)
    return vals, sorted(a) + sorted(ext)


# ---------------------------------------------------------------------------
# Estimand evaluation


class _CondCache:
    def __init__(self, observed: JointTable):
        self.obs = observed
        self.cache: Dict[Tuple[Tuple[str, ...], Tuple[str, ...]], np.ndarray] = {}

    def table(self, target: Tuple[str, ...], given: Tuple[str, ...]):
        key = (target, given)
        if key in self.cache:
            return self.cache[key]
        both = self.obs.marginal(sorted(set(target) | set(given)))
        den = both.marginal(sorted(given)) if given else None
        vals = both.values
        if den is not None:
            den_aligned = den.values
            shape = [1] * len(both.scope)
            for i, v in enumerate(both.scope):
                if v in set(given):
                    shape[i] = both.values.shape[i]
            den_full = np.ones_like(vals)
            # broadcast denominator over target axes
            idxs = [both.scope.index(v) for v in den.scope]
            den_b = np.moveaxis(
                den_aligned.reshape(den_aligned.shape),
                range(len(den.scope)), range(len(den.scope)))
            expand = vals
            den_full = den_aligned
            for ax, v in enumerate(both.scope):
                if v not in set(given):
                    den_full = np.expand_dims(den_full, ax)
            with np.errstate(invalid="ignore", divide="ignore"):
                out = np.where(den_full > 0, vals / np.where(
                    den_full == 0, 1, den_full), 0.0)
        else:
            out = vals
        self.cache[key] = (both.scope, out)
        return self.cache[key]


def evaluate_estimand(e: Estimand, observed: JointTable) -> JointTable:
    """Evaluate a hat-free estimand against an observed joint.

    Returns a table over the estimand's free variables (sorted); free
    variables must name scope variables of `observed`.
    """
    fvs = sorted(free_vars(e))
    card_of: Dict[str, int] = {}

    def record_cards(node: Estimand):
        if isinstance(node, Cond):
            for v, r in node.target + node.given:
                if isinstance(r, str):
                    card_of[r] = observed.card[observed.axis(v)]
        elif isinstance(node, Prod):
            for f in node.factors:
                record_cards(f)
        elif isinstance(node, Marg):
            record_cards(node.body)
        elif isinstance(node, Ratio):
            record_cards(node.num)
            record_cards(node.den)

    record_cards(e)
    cache = _CondCache(observed)

    def ev(node: Estimand, env: Dict[str, int]) -> float:
        if isinstance(node, Cond):
            tvars = tuple(v for v, _ in node.target)
            gvars = tuple(v for v, _ in node.given)
            scope, table = cache.table(tvars, gvars)
            pos = []
            slot_by_var = {v: r for v, r in node.target + node.given}
            for v in scope:
                r = slot_by_var[v]
                pos.append(r if isinstance(r, int) else env[r])
            return float(table[tuple(pos)])
        if isinstance(node, Prod):
            out = 1.0
            for f in node.factors:
                out *= ev(f, env)
                if out == 0.0:
                    return 0.0
            return out
        if isinstance(node, Marg):
            total = 0.0
            cards = [card_of.get(v, observed.card[observed.axis(v)]
                                 if v in observed.scope else 2)
                     for v in node.vars]
            states = [0] * len(node.vars)
            while True:
                env2 = dict(env)
                for v, s in zip(node.vars, states):
                    env2[v] = s
                total += ev(node.body, env2)
                k = len(states) - 1
                while k >= 0:
                    states[k] += 1
                    if states[k] < cards[k]:
                        break
                    states[k] = 0
                    k -= 1
                if k < 0:
                    break
            return total
        if isinstance(node, Ratio):
            den = ev(node.den, env)
            num = ev(node.num, env)
            if den == 0.0:
                if num == 0.0:
                    return 0.0
                raise ZeroDenominator(f"ratio at {env}")
            return num / den
        raise TypeError(type(node))

    cards = [card_of.get(v, observed.card[observed.axis(v)]) for v in fvs]
    out = np.zeros(cards) if fvs else np.zeros(())
    if not fvs:
        out[()] = ev(e, {})
    else:
        states = [0] * len(fvs)
        while True:
            env = {v: s for v, s in zip(fvs, states)}
            out[tuple(states)] = ev(e, env)
            k = len(states) - 1
            while k >= 0:
                states[k] += 1
                if states[k] < cards[k]:
                    break
                states[k] = 0
                k -= 1
            if k < 0:
                break
    return JointTable(tuple(fvs), out, tuple(cards))


# ---------------------------------------------------------------------------
# Information measures


def relative_entropy(p: JointTable, q: JointTable) -> float:
    """D(p || q) in nats; 0*ln(0) = 0; raises SupportMismatch on
    q = 0 < p (the +inf case)."""
    if p.scope != q.scope:
        raise ModelError("relative_entropy requires identical scopes")
    pv, qv = p.values.ravel(), q.values.ravel()
    if np.any((qv == 0) & (pv > 0)):
        raise SupportMismatch("q vanishes on the support of p")
    mask = pv > 0
    return float(np.sum(pv[mask] * np.log(pv[mask] / qv[mask])))


@dataclass(frozen=True)
class InfoReport:
    h_mi: float
    h_uprooted_mi: float
    h_cmi: float
    h_uprooted_cmi: float
    loss_mi: float
    loss_cmi: float


def _xlogratio(w: np.ndarray, num: np.ndarray, den: np.ndarray) -> float:
    """Sum of w * ln(num/den) with 0-weight terms dropped."""
    mask = w > 0
    if not mask.any():
        return 0.0
    n, d = num[mask], den[mask]
    with np.errstate(divide="ignore"):
        logs = np.where(n > 0, np.log(np.where(n > 0, n, 1.0)), -np.inf) - \
            np.log(d)
    return float(np.sum(w[mask] * logs))


def _family(model: DiscreteModel, b: NodeSet, a: NodeSet,
            e: NodeSet) -> Tuple[float, float, float]:
    """Returns (H(b:a|e), H(b:a-hat|e), loss) for one conditioning set."""
    b, a, e = frozenset(b), frozenset(a), frozenset(e)
    scope = sorted(b | a | e)
    pabe = observed_marginal(model).marginal(scope)
    axes_b = [scope.index(v) for v in sorted(b)]
    axes_a = [scope.index(v) for v in sorted(a)]
    axes_e = [scope.index(v) for v in sorted(e)]

    def cond(num_keep, den_keep):
        num = pabe.marginal(num_keep).values
        den = pabe.marginal(den_keep).values
        # broadcast to full scope order
        def expand(tbl, keep):
            out = tbl
            for i, v in enumerate(scope):
                if v not in keep:
                    out = np.expand_dims(out, i)
            return out
        n = expand(num, sorted(set(num_keep)))
        d = expand(den, sorted(set(den_keep)))
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(d > 0, n / np.where(d == 0, 1, d), 0.0)

    p_b_ae = cond(sorted(b | a | e), sorted(a | e))
    p_b_e = cond(sorted(b | e), sorted(e)) if e else cond(sorted(b), [])

    # interventional: P(b|a-hat, e) = P(b,e|a-hat) / P(e|a-hat)
    dt = do_distribution(model, b | e, a)  # scope sorted(b|e)+sorted(a)
    # align to `scope` order
    perm = [dt.scope.index(v) for v in scope]
    p_be_ahat = np.moveaxis(dt.values, perm, range(len(scope)))
    if e:
        sum_axes = tuple(axes_b)
        p_e_ahat = p_be_ahat.sum(axis=sum_axes, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            p_b_ahat_e = np.where(p_e_ahat > 0,
                                  p_be_ahat / np.where(p_e_ahat == 0, 1,
                                                       p_e_ahat), 0.0)
    else:
        p_b_ahat_e = p_be_ahat

    w = pabe.values
    h_cmi = _xlogratio(w, p_b_ae, np.where(p_b_e > 0, p_b_e, 1.0))
    h_up = _xlogratio(w, p_b_ahat_e, np.where(p_b_e > 0, p_b_e, 1.0))
    # loss: sum over a,e of P(a,e) * D(P(b|a,e) // P(b|a-hat,e))
    pae = pabe.marginal(sorted(a | e)).values
    pae_full = pae
    for i, v in enumerate(scope):
        if v in b:
            pae_full = np.expand_dims(pae_full, i)
    w_loss = np.broadcast_to(pae_full, w.shape) * p_b_ae
    loss = _xlogratio(w_loss, p_b_ae, np.where(p_b_ahat_e > 0,
                                               p_b_ahat_e, 1.0))
    # terms with p_b_ahat_e == 0 < weight are +inf; surface them honestly
    bad = (w_loss > 0) & (p_b_ahat_e == 0)
    if bad.any():
        loss = math.inf
    return h_cmi, h_up, loss


def info_measures(model: DiscreteModel, b: NodeSet, a: NodeSet,
                  e: NodeSet = frozenset()) -> InfoReport:
    """Mutual information, its uprooted variant, and the losses.

    The mi fields ignore `e`; the cmi fields condition on it.
    """
    h_mi, h_up_mi, loss_mi = _family(model, b, a, frozenset())
    if e:
        h_cmi, h_up_cmi, loss_cmi = _family(model, b, a, frozenset(e))
    else:
        h_cmi, h_up_cmi, loss_cmi = h_mi, h_up_mi, loss_mi
    return InfoReport(h_mi, h_up_mi, h_cmi, h_up_cmi, loss_mi, loss_cmi)


# ---------------------------------------------------------------------------
# Random models


def random_model(graph: CausalGraph,
                 cardinalities: Union[int, Mapping[NodeId, int]] = 2,
                 seed: int = 0) -> DiscreteModel:
    """Dirichlet(1)-distributed CPT columns, fully determined by seed.

    Draw order: sorted visible nodes then latents in arc order; within
    a node, parent-state columns in row-major order.
    """
    expanded = latent_expand(graph)
    lat = [u for _, u in expanded.latent_of_arc]
    if isinstance(cardinalities, int):
        card = {n: cardinalities for n in list(graph.visible) + lat}
    else:
        card = {n: cardinalities.get(n, 2) for n in list(graph.visible) + lat}
    rng = np.random.default_rng(seed)
    cpts: Dict[NodeId, np.ndarray] = {}
    order = sorted(graph.visible) + lat

    def parent_order(node):
        pa = expanded.parents(node)
        vis = sorted(p for p in pa if p in graph.visible)
        return vis + [u for u in lat if u in pa]

    for node in order:
        pdims = [card[p] for p in parent_order(node)]
        k = card[node]
        ncols = int(np.prod(pdims)) if pdims else 1
        cols = rng.gamma(1.0, 1.0, size=(ncols, k))
        cols = cols / cols.sum(axis=1, keepdims=True)
        cpt = cols.T.reshape([k] + pdims)
        cpts[node] = cpt
    return DiscreteModel(graph, card, cpts)
