"""Hat-free estimand expression trees.

Node kinds: observed conditionals, products, marginalizing sums,
ratios, and (as a construction helper rather than a node) renaming of
bound summation variables to primed copies.

Each variable slot in a conditional is a ``(var, ref)`` pair: ``var``
names the graph node the table dimension belongs to, ``ref`` names the
binding the value comes from when evaluating (a free query variable, a
sum variable such as ``x'``, or an int literal for pinned context).

Only structural no-ops are simplified -- empty sums, singleton
products, and complete chain-rule collapses -- so the trees keep the
shape of hand-derived formulas.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Sequence, Tuple, Union

Ref = Union[str, int]
Slot = Tuple[str, Ref]


@dataclass(frozen=True)
class Cond:
    """Observed conditional P(target | given)."""
    target: Tuple[Slot, ...]
    given: Tuple[Slot, ...]


@dataclass(frozen=True)
class Prod:
    factors: Tuple["Estimand", ...]


@dataclass(frozen=True)
class Marg:
    """Sum of body over all states of the named bound variables."""
    vars: Tuple[str, ...]
    body: "Estimand"


@dataclass(frozen=True)
class Ratio:
    num: "Estimand"
    den: "Estimand"


Estimand = Union[Cond, Prod, Marg, Ratio]

ONE: Estimand = Prod(())


def conditional(target: Sequence[Slot], given: Sequence[Slot]) -> Cond:
    return Cond(tuple(sorted(target)), tuple(sorted(given, key=lambda s: s[0])))


def product(factors: Iterable[Estimand]) -> Estimand:
    flat: List[Estimand] = []
    for f in factors:
        if isinstance(f, Prod):
            flat.extend(f.factors)
        else:
            flat.append(f)
    if len(flat) == 1:
        return flat[0]
    return Prod(tuple(flat))


def marginalize(vars_: Iterable[str], body: Estimand) -> Estimand:
    vs = tuple(sorted(set(vars_)))
    if not vs:
        return body
    collapsed = _chain_collapse(vs, body)
    if collapsed is not None:
        return collapsed
    return Marg(vs, body)


def ratio(num: Estimand, den: Estimand) -> Estimand:
    if den == ONE:
        return num
    return Ratio(num, den)


def refs_of(e: Estimand) -> FrozenSet[Ref]:
    """All value references appearing in the tree, bound ones excluded."""
    out: set = set()

    def walk(node: Estimand, bound: FrozenSet[str]):
        if isinstance(node, Cond):
            for _, r in node.target + node.given:
                if not (isinstance(r, str) and r in bound):
                    out.add(r)
        elif isinstance(node, Prod):
            for f in node.factors:
                walk(f, bound)
        elif isinstance(node, Marg):
            inner = bound | frozenset(node.vars)
            walk(node.body, inner)
        elif isinstance(node, Ratio):
            walk(node.num, bound)
            walk(node.den, bound)

    walk(e, frozenset())
    return frozenset(out)


def free_vars(e: Estimand) -> FrozenSet[str]:
    return frozenset(r for r in refs_of(e) if isinstance(r, str))


def rename_refs(e: Estimand, mapping: Dict[str, str]) -> Estimand:
    """Substitute value references (used to prime bound variables)."""
    if isinstance(e, Cond):
        def sub(slots):
            return tuple((v, mapping.get(r, r) if isinstance(r, str) else r)
                         for v, r in slots)
        return Cond(sub(e.target), sub(e.given))
    if isinstance(e, Prod):
        return Prod(tuple(rename_refs(f, mapping) for f in e.factors))
    if isinstance(e, Marg):
        inner = {k: v for k, v in mapping.items() if k not in e.vars}
        return Marg(e.vars, rename_refs(e.body, inner))
    if isinstance(e, Ratio):
        return Ratio(rename_refs(e.num, mapping), rename_refs(e.den, mapping))
    raise TypeError(type(e))


def bound_var_rename(vars_: Sequence[str], body: Estimand,
                     taken: Iterable[str]) -> Tuple[Tuple[str, ...], Estimand]:
    """Prime summation variables that collide with outer names."""
    taken = set(taken)
    mapping = {}
    new_vars = []
    for v in vars_:
        nv = v
        while nv in taken:
            nv = nv + "'"
        if nv != v:
            mapping[v] = nv
        new_vars.append(nv)
        taken.add(nv)
    if mapping:
        body = rename_refs(body, mapping)
    return tuple(new_vars), body


def _chain_collapse(vars_: Tuple[str, ...], body: Estimand):
    """Collapse sum over a complete chain-rule product.

    If the body's conditionals form P(s1|C) P(s2|s1,C) ... P(sk|s<k,C)
    the product equals P(s1..sk|C); summing refs inside {s1..sk} then
    just shortens the target.  Returns None when the pattern is absent.
    """
    factors: Tuple[Estimand, ...]
    if isinstance(body, Cond):
        factors = (body,)
    elif isinstance(body, Prod):
        factors = body.factors
    else:
        return None
    if not factors or not all(isinstance(f, Cond) for f in factors):
        return None
    conds: List[Cond] = sorted(factors, key=lambda c: len(c.given))
    context = set(conds[0].given)
    seen: set = set(conds[0].target)
    for c in conds[1:]:
        if set(c.given) != context | seen:
            return None
        seen |= set(c.target)
    target_refs = {r for _, r in seen if isinstance(r, str)}
    if not set(vars_) <= target_refs:
        return None
    remaining = tuple(sorted(s for s in seen
                             if not (isinstance(s[1], str) and s[1] in vars_)))
    if not remaining:
        return ONE
    return Cond(remaining, tuple(sorted(context, key=lambda s: s[0])))


def is_hat_free(e: Estimand) -> bool:
    """Structural scan: the tree admits no interventional markers by
    construction; verify only known node kinds appear."""
    if isinstance(e, Cond):
        return True
    if isinstance(e, Prod):
        return all(is_hat_free(f) for f in e.factors)
    if isinstance(e, Marg):
        return is_hat_free(e.body)
    if isinstance(e, Ratio):
        return is_hat_free(e.num) and is_hat_free(e.den)
    return False
