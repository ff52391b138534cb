"""Concrete models: non-identifiability certificates and information
witnesses for the catalog graphs.

The shark-teeth family is built from parity-tilt matrices around the
uniform kernel.  The tilt keeps every CPT entry inside [0, 1]; the
price is a fixed attenuation lambda = 1/(1+g0)^2 multiplying the
g0-dependent parts of the joint and the interventional distribution
relative to the raw rotation-matrix recipe, whose literal entries
leave [0, 1] for any nonzero tilt.  At g0 = 0 the construction is
exactly the XOR model.  All certificate properties (observed joints
agreeing exactly between the +g0 and -g0 models, interventional gap of
order g0) are preserved.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .graph import CausalGraph, NodeId, NodeSet, latent_expand
from .inference import DiscreteModel, random_model


class InvalidG0(ValueError):
    pass


@dataclass(frozen=True)
class RotationKit:
    """The 2x2 rotation that diagonalizes the averaging kernel."""
    omega: np.ndarray
    averaging: np.ndarray

    @staticmethod
    def make() -> "RotationKit":
        omega = np.array([[1.0, 1.0], [-1.0, 1.0]]) / np.sqrt(2.0)
        averaging = np.full((2, 2), 0.5)
        return RotationKit(omega, averaging)


@dataclass(frozen=True)
class CounterexamplePair:
    model_a: DiscreteModel
    model_b: DiscreteModel
    s: NodeSet
    t: NodeSet


def cpt_from_function(graph: CausalGraph, card: Dict[NodeId, int],
                      node: NodeId,
                      fn: Callable[[int, Dict[NodeId, int]], float]
                      ) -> np.ndarray:
    """Tabulate P(node = k | parents) from a closed-form rule.

    Parent axes follow DiscreteModel.parent_order: sorted visible
    parents then latents in arc order.
    """
    expanded = latent_expand(graph)
    lat_order = [u for _, u in expanded.latent_of_arc]
    pa = expanded.parents(node)
    order = sorted(p for p in pa if p in graph.visible) + \
        [u for u in lat_order if u in pa]
    shape = [card[node]] + [card[p] for p in order]
    cpt = np.zeros(shape)
    for states in itertools.product(*[range(card[p]) for p in order]):
        env = dict(zip(order, states))
        for k in range(card[node]):
            cpt[(k,) + states] = fn(k, env)
    return cpt


def _sign(y: int) -> int:
    return 1 if y % 2 == 0 else -1


# ---------------------------------------------------------------------------
# One shark tooth


def one_tooth_graph() -> CausalGraph:
    return CausalGraph.make(["x", "y"], [("x", "y")], [("x", "y")])


def one_tooth_pair() -> CounterexamplePair:
    """AND-gate model and its bit-flipped twin: identical observed
    joints, interventional distributions differing by 1/2."""
    g = one_tooth_graph()
    card = {"x": 2, "y": 2, "u_0": 2}

    def model(flip: bool) -> DiscreteModel:
        def p_x(k, env):
            want = env["u_0"] if not flip else 1 - env["u_0"]
            return 1.0 if k == want else 0.0

        def p_y(k, env):
            base = env["x"] & env["u_0"]
            if flip:
                base_src = (1 - env["x"]) & env["u_0"]
                return 1.0 if k == 1 - base_src else 0.0
            return 1.0 if k == base else 0.0

        cpts = {
            "u_0": np.array([0.5, 0.5]),
            "x": cpt_from_function(g, card, "x", p_x),
            "y": cpt_from_function(g, card, "y", p_y),
        }
        return DiscreteModel(g, dict(card), cpts)

    return CounterexamplePair(model(False), model(True),
                              frozenset({"y"}), frozenset({"x"}))


def one_tooth_xor_model() -> DiscreteModel:
    g = one_tooth_graph()
    card = {"x": 2, "y": 2, "u_0": 2}
    cpts = {
        "u_0": np.array([0.5, 0.5]),
        "x": cpt_from_function(g, card, "x",
                               lambda k, e: float(k == e["u_0"])),
        "y": cpt_from_function(g, card, "y",
                               lambda k, e: float(k == e["x"] ^ e["u_0"])),
    }
    return DiscreteModel(g, card, cpts)


# ---------------------------------------------------------------------------
# N shark teeth


def shark_teeth_graph(N: int) -> CausalGraph:
    """x -> y_N with an arc chain y_N <-> ... <-> y_1 <-> x."""
    teeth = [f"y{j}" for j in range(1, N + 1)]
    arcs = [(f"y{j + 1}", f"y{j}") for j in range(N - 1, 0, -1)]
    arcs.append(("y1", "x"))
    return CausalGraph.make(["x"] + teeth, [("x", f"y{N}")], arcs)


def shark_lambda(g0: float) -> float:
    """Attenuation of the g0-dependent terms in the valid construction."""
    return 1.0 / (1.0 + abs(g0)) ** 2


def _tooth_tilts(N: int, g0: float) -> Dict[str, np.ndarray]:
    """Parity tilt matrices; P(y_j = y | a, b) = 1/2 + (-1)^y T[a, b]."""
    if abs(g0) >= 0.3:
        raise InvalidG0("|g0| must stay below 0.3")
    a = 1.0 / (2.0 * (1.0 + abs(g0)))
    sg = 1.0 if g0 >= 0 else -1.0
    # last tooth rows indexed by x, columns by the shared latent
    t_last = np.array([[a * (1 + g0), -a * (1 + g0)],
                       [-a * (1 - g0), a * (1 - g0)]])
    t_mid = np.array([[0.5, -0.5], [-0.5, 0.5]])
    t_first = np.array([[a * (1 - g0), -a * (1 + g0)],
                        [-a * (1 - g0), a * (1 + g0)]])
    del sg
    tilts = {f"y{N}": t_last, "y1": t_first}
    for j in range(2, N):
        tilts[f"y{j}"] = t_mid
    if N == 1:
        raise InvalidG0("tilt recipe needs at least 2 teeth")
    return tilts


def shark_teeth_model(N: int, g0: float = 0.1,
                      sign_flip: bool = False) -> DiscreteModel:
    """Valid-CPT shark-teeth model; sign_flip negates g0 to produce the
    certificate partner.  N = 1 degenerates to the one-tooth pair's
    AND-gate model."""
    if N < 1:
        raise InvalidG0("N must be >= 1")
    if sign_flip:
        g0 = -g0
    if N == 1:
        pair = one_tooth_pair()
        return pair.model_b if sign_flip else pair.model_a
    g = shark_teeth_graph(N)
    exp = latent_expand(g)
    card = {n: 2 for n in exp.nodes}
    tilts = _tooth_tilts(N, g0)
    arc_latent = dict(exp.latent_of_arc)

    def latent_of(a: str, b: str) -> str:
        return arc_latent[tuple(sorted((a, b)))]

    cpts: Dict[str, np.ndarray] = {}
    for u in [u for _, u in exp.latent_of_arc]:
        cpts[u] = np.array([0.5, 0.5])
    u_x = latent_of("y1", "x")
    cpts["x"] = cpt_from_function(g, card, "x",
                                  lambda k, e: float(k == e[u_x]))
    for j in range(1, N + 1):
        name = f"y{j}"
        tilt = tilts[name]
        if j == N:
            row, col = "x", latent_of(f"y{N}", f"y{N - 1}" if N > 1 else "x")
        elif j == 1:
            row = latent_of("y2", "y1")
            col = latent_of("y1", "x")
        else:
            row = latent_of(f"y{j + 1}", f"y{j}")
            col = latent_of(f"y{j}", f"y{j - 1}")

        def p(k, e, tilt=tilt, row=row, col=col):
            return 0.5 + _sign(k) * tilt[e[row], e[col]]

        cpts[name] = cpt_from_function(g, card, name, p)
    model = DiscreteModel(g, card, cpts)
    return model


def shark_joint_formula(N: int, g0: float, ys: Tuple[int, ...],
                        x: int) -> float:
    """Closed form of P(y., x) for the valid construction."""
    sigma = _sign(sum(ys))
    lam = shark_lambda(g0)
    return (1.0 / 2 ** (N + 1)) * (1.0 + sigma * lam * (1.0 - g0 ** 2))


def shark_do_formula(N: int, g0: float, ys: Tuple[int, ...],
                     x: int) -> float:
    """Closed form of P(y. | do(x)) for the valid construction."""
    sigma = _sign(sum(ys))
    lam = shark_lambda(g0)
    return (1.0 / 2 ** N) * (1.0 - sigma * lam * g0 * (_sign(x) + g0))


def shark_teeth_certificate(N: int, g0: float = 0.1) -> CounterexamplePair:
    s = frozenset(f"y{j}" for j in range(1, N + 1)) if N > 1 else \
        frozenset({"y"})
    t = frozenset({"x"})
    if N == 1:
        return one_tooth_pair()
    return CounterexamplePair(shark_teeth_model(N, g0, False),
                              shark_teeth_model(N, g0, True), s, t)


def shark_teeth_xor_model(N: int) -> DiscreteModel:
    if N == 1:
        return one_tooth_xor_model()
    return shark_teeth_model(N, 0.0)


# ---------------------------------------------------------------------------
# Modified shark teeth (intervention at the end of a deterministic chain)


def modified_shark_teeth_graph(N: int) -> CausalGraph:
    teeth = [f"y{j}" for j in range(1, N + 1)]
    nodes = ["x1", "x2", "x3"] + teeth
    directed = [("x1", "x2"), ("x2", "x3"), ("x3", f"y{N}")]
    arcs = [(f"y{j + 1}", f"y{j}") for j in range(N - 1, 0, -1)]
    arcs.append(("y1", "x1"))
    return CausalGraph.make(nodes, directed, arcs)


def modified_shark_teeth_model(N: int, g0: float = 0.1,
                               sign_flip: bool = False) -> DiscreteModel:
    """Shark-teeth CPTs with the intervention point moved to the end of
    a deterministic two-step chain."""
    if N < 2:
        raise InvalidG0("modified construction needs N >= 2")
    if sign_flip:
        g0 = -g0
    g = modified_shark_teeth_graph(N)
    exp = latent_expand(g)
    card = {n: 2 for n in exp.nodes}
    tilts = _tooth_tilts(N, g0)
    arc_latent = dict(exp.latent_of_arc)

    def latent_of(a, b):
        return arc_latent[tuple(sorted((a, b)))]

    cpts: Dict[str, np.ndarray] = {}
    for u in [u for _, u in exp.latent_of_arc]:
        cpts[u] = np.array([0.5, 0.5])
    u_x = latent_of("y1", "x1")
    cpts["x1"] = cpt_from_function(g, card, "x1",
                                   lambda k, e: float(k == e[u_x]))
    cpts["x2"] = cpt_from_function(g, card, "x2",
                                   lambda k, e: float(k == e["x1"]))
    cpts["x3"] = cpt_from_function(g, card, "x3",
                                   lambda k, e: float(k == e["x2"]))
    for j in range(1, N + 1):
        name = f"y{j}"
        tilt = tilts[name]
        if j == N:
            row, col = "x3", latent_of(f"y{N}", f"y{N - 1}")
        elif j == 1:
            row, col = latent_of("y2", "y1"), latent_of("y1", "x1")
        else:
            row = latent_of(f"y{j + 1}", f"y{j}")
            col = latent_of(f"y{j}", f"y{j - 1}")

        def p(k, e, tilt=tilt, row=row, col=col):
            return 0.5 + _sign(k) * tilt[e[row], e[col]]

        cpts[name] = cpt_from_function(g, card, name, p)
    return DiscreteModel(g, card, cpts)


def modified_shark_teeth_certificate(N: int = 3,
                                     g0: float = 0.1) -> CounterexamplePair:
    s = frozenset(f"y{j}" for j in range(1, N + 1))
    return CounterexamplePair(modified_shark_teeth_model(N, g0, False),
                              modified_shark_teeth_model(N, g0, True),
                              s, frozenset({"x3"}))


# ---------------------------------------------------------------------------
# The disputed seven-node graph


def tp_fig9_graph() -> CausalGraph:
    nodes = ["x", "y", "w1", "w2", "w3", "w4", "w5"]
    directed = [("x", "y"), ("w2", "x"), ("w4", "x"),
                ("w1", "w2"), ("w3", "w4")]
    arcs = [("y", "w1"), ("x", "w1"), ("w1", "w3"),
            ("w4", "w5"), ("w3", "w5"), ("w2", "w3")]
    return CausalGraph.make(nodes, directed, arcs)


def _tp_fig9_model(core_y: Callable[[int, int, int], float],
                   core_w1: Callable[[int, int], float]) -> DiscreteModel:
    g = tp_fig9_graph()
    exp = latent_expand(g)
    card = {n: 2 for n in exp.nodes}
    arc_latent = dict(exp.latent_of_arc)
    u1 = arc_latent[tuple(sorted(("y", "w1")))]

    cpts: Dict[str, np.ndarray] = {}
    for u in [u for _, u in exp.latent_of_arc]:
        cpts[u] = np.array([0.5, 0.5])
    for w in ("w3", "w4", "w5"):
        cpts[w] = cpt_from_function(g, card, w, lambda k, e: 0.5)
    cpts["w2"] = cpt_from_function(g, card, "w2",
                                   lambda k, e: float(k == e["w1"]))
    cpts["w1"] = cpt_from_function(g, card, "w1",
                                   lambda k, e: core_w1(k, e[u1]))
    cpts["x"] = cpt_from_function(g, card, "x",
                                  lambda k, e: float(k == e["w2"]))
    cpts["y"] = cpt_from_function(g, card, "y",
                                  lambda k, e: core_y(k, e["x"], e[u1]))
    return DiscreteModel(g, card, cpts)


def tp_fig9_model() -> CounterexamplePair:
    """Deterministic-wire embedding of the one-tooth pair."""
    a = _tp_fig9_model(lambda k, x, u: float(k == (x & u)),
                       lambda k, u: float(k == u))
    b = _tp_fig9_model(lambda k, x, u: float(k == 1 - ((1 - x) & u)),
                       lambda k, u: float(k == 1 - u))
    return CounterexamplePair(a, b, frozenset({"y"}), frozenset({"x"}))


def tp_fig9_xor_model() -> DiscreteModel:
    return _tp_fig9_model(lambda k, x, u: float(k == x ^ u),
                          lambda k, u: float(k == u))


# ---------------------------------------------------------------------------
# Zero-information and modular-shift models


def zero_info_model(graph: CausalGraph, t: NodeSet,
                    seed: int = 0) -> DiscreteModel:
    """Random model whose CPTs ignore their parents in t, making every
    arrow out of t erasable."""
    base = random_model(graph, 2, seed)
    t = frozenset(t)
    for node in list(base.cpts):
        order = base.parent_order(node)
        axes = tuple(i + 1 for i, p in enumerate(order) if p in t)
        if not axes:
            continue
        cpt = base.cpts[node]
        mean = cpt.mean(axis=axes, keepdims=True)
        base.cpts[node] = np.broadcast_to(mean, cpt.shape).copy()
    base.validate()
    return base


def indef_model(N: int) -> DiscreteModel:
    """Modular-shift model attaining the lower endpoint -ln(N) of the
    uprooted-information interval."""
    if N < 2:
        raise ValueError("N must be >= 2")
    g = one_tooth_graph()
    card = {"x": N, "y": N, "u_0": N}
    cpts = {
        "u_0": np.full(N, 1.0 / N),
        "x": cpt_from_function(g, card, "x",
                               lambda k, e: float(k == e["u_0"])),
        "y": cpt_from_function(g, card, "y",
                               lambda k, e: float(k == (e["x"] + e["u_0"])
                                                 % N)),
    }
    return DiscreteModel(g, card, cpts)


def indef_confounder_free_model(N: int = 2, seed: int = 1) -> DiscreteModel:
    """Same graph, but x and y ignore the latent: behaves like y <- x."""
    g = one_tooth_graph()
    base = random_model(g, N if isinstance(N, dict) else
                        {"x": N, "y": N, "u_0": N}, seed)
    for node in ("x", "y"):
        order = base.parent_order(node)
        axes = tuple(i + 1 for i, p in enumerate(order)
                     if p not in base.graph.visible)
        cpt = base.cpts[node]
        mean = cpt.mean(axis=axes, keepdims=True)
        base.cpts[node] = np.broadcast_to(mean, cpt.shape).copy()
    base.validate()
    return base


# ---------------------------------------------------------------------------
# Catalog


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    graph: CausalGraph
    s: NodeSet
    t: NodeSet
    identifiable: bool
    certificate: Optional[Callable[[], CounterexamplePair]] = None
    negative_witness: Optional[Callable[[], DiscreteModel]] = None


def backdoor_frontdoor_graph() -> CausalGraph:
    return CausalGraph.make(["x", "y", "z"], [("x", "z"), ("z", "y")],
                            [("x", "y")])


def tp_fig2_graph() -> CausalGraph:
    nodes = ["x", "y", "z1", "z2", "z3"]
    directed = [("z2", "x"), ("x", "z1"), ("z2", "z1"), ("z2", "z3"),
                ("z1", "y"), ("z3", "y")]
    arcs = [("x", "y"), ("x", "z2"), ("x", "z3"), ("z2", "y")]
    return CausalGraph.make(nodes, directed, arcs)


def tp_fig3_graph() -> CausalGraph:
    nodes = ["x", "y", "z1", "z2"]
    directed = [("x", "z1"), ("z1", "z2"), ("x", "y"), ("z2", "y"),
                ("z1", "y")]
    arcs = [("x", "z2"), ("z1", "y")]
    return CausalGraph.make(nodes, directed, arcs)


def tp_fig6_graph() -> CausalGraph:
    nodes = ["w1", "w2", "x", "y", "z"]
    directed = [("w1", "w2"), ("w2", "x"), ("x", "z"), ("z", "y")]
    arcs = [("x", "w1"), ("z", "w1")]
    return CausalGraph.make(nodes, directed, arcs)


def missing_tooth_graph() -> CausalGraph:
    return shark_teeth_graph(3)


def paper_graph_catalog() -> List[CatalogEntry]:
    fd = backdoor_frontdoor_graph()
    teeth3 = frozenset({"y1", "y2", "y3"})
    entries = [
        CatalogEntry("backdoor", fd, frozenset({"y"}), frozenset({"z"}),
                     True),
        CatalogEntry("frontdoor", fd, frozenset({"y"}), frozenset({"x"}),
                     True),
        CatalogEntry("tp_fig2", tp_fig2_graph(), frozenset({"y"}),
                     frozenset({"x"}), True),
        CatalogEntry("tp_fig3", tp_fig3_graph(), frozenset({"y"}),
                     frozenset({"x"}), True),
        CatalogEntry("tp_fig6", tp_fig6_graph(), frozenset({"y"}),
                     frozenset({"x"}), True),
        CatalogEntry("missing_tooth", missing_tooth_graph(),
                     frozenset({"y1", "y3"}), frozenset({"x"}), True),
        CatalogEntry("one_tooth", one_tooth_graph(), frozenset({"y"}),
                     frozenset({"x"}), False,
                     one_tooth_pair, one_tooth_xor_model),
        CatalogEntry("shark3", shark_teeth_graph(3), teeth3,
                     frozenset({"x"}), False,
                     lambda: shark_teeth_certificate(3, 0.1),
                     lambda: shark_teeth_xor_model(3)),
        CatalogEntry("shark3_modified", modified_shark_teeth_graph(3),
                     teeth3, frozenset({"x3"}), False,
                     lambda: modified_shark_teeth_certificate(3, 0.1),
                     lambda: modified_shark_teeth_model(3, 0.0)),
        CatalogEntry("tp_fig9", tp_fig9_graph(), frozenset({"y"}),
                     frozenset({"x"}), False,
                     tp_fig9_model, tp_fig9_xor_model),
        CatalogEntry("pos_direct",
                     CausalGraph.make(["x", "y"], [("x", "y")]),
                     frozenset({"y"}), frozenset({"x"}), True),
        CatalogEntry("pos_chain",
                     CausalGraph.make(["x", "y", "z"],
                                      [("z", "x"), ("x", "y")]),
                     frozenset({"y"}), frozenset({"x"}), True),
        CatalogEntry("pos_arc_zx",
                     CausalGraph.make(["x", "y", "z"], [("x", "y")],
                                      [("z", "x")]),
                     frozenset({"y"}), frozenset({"x"}), True),
        CatalogEntry("zero_isolated",
                     CausalGraph.make(["x", "y"]),
                     frozenset({"y"}), frozenset({"x"}), True),
        CatalogEntry("zero_reverse",
                     CausalGraph.make(["x", "y"], [("y", "x")]),
                     frozenset({"y"}), frozenset({"x"}), True),
        CatalogEntry("zero_confounded",
                     CausalGraph.make(["x", "y"], [], [("x", "y")]),
                     frozenset({"y"}), frozenset({"x"}), True),
        CatalogEntry("indef", one_tooth_graph(), frozenset({"y"}),
                     frozenset({"x"}), False,
                     one_tooth_pair, lambda: indef_model(2)),
    ]
    return entries


def catalog_entry(name: str) -> CatalogEntry:
    for e in paper_graph_catalog():
        if e.name == name:
            return e
    raise KeyError(name)
