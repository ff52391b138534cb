"""Graph DSL, query syntax, model files, and estimand text forms.

Graph grammar::

    graph <name> { <stmt>* }
    stmt:  a -> b ;   |   a <-> b ;   |   node a ;
    #-comments run to end of line

Queries look like ``P(y1, y3 | do(x))``; whitespace is free.

The plain estimand form is itself parseable: products juxtapose,
``sum_v1,v2`` extends to the end of its bracket group, brackets group,
and ``[ num / den ]`` is a normalized ratio.  A primed reference like
``x'`` denotes a bound copy of ``x``; ``w2=0`` pins a variable to a
literal state.
"""

from __future__ import annotations

import json
import re
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import estimand as E
from .graph import CausalGraph, GraphError, NodeId, validate
from .inference import DiscreteModel


class DslSyntaxError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        self.line, self.col = line, col
        super().__init__(f"{message} (line {line}, column {col})")


class QueryError(ValueError):
    pass


class UnknownExample(KeyError):
    pass


# ---------------------------------------------------------------------------
# Graph DSL


_TOKEN = re.compile(r"\s*(graph|node|<->|->|[{};]|[A-Za-z_][A-Za-z0-9_]*)")


def _tokenize(source: str):
    pos = 0
    line, col = 1, 1
    out = []
    while pos < len(source):
        ch = source[pos]
        if ch == "#":
            nl = source.find("\n", pos)
            pos = len(source) if nl < 0 else nl
            continue
        if ch in " \t\r\n":
            if ch == "\n":
                line += 1
                col = 1
            else:
                col += 1
            pos += 1
            continue
        m = _TOKEN.match(source, pos)
        if not m or m.start(1) != pos:
            raise DslSyntaxError(f"unexpected character {ch!r}", line, col)
        tok = m.group(1)
        out.append((tok, line, col))
        pos = m.end(1)
        col += len(tok)
    return out


def parse_graph(source: str) -> Tuple[str, CausalGraph]:
    """Parse the DSL into a validated graph; returns (name, graph)."""
    toks = _tokenize(source)
    i = 0

    def expect(what):
        nonlocal i
        if i >= len(toks):
            raise DslSyntaxError(f"expected {what}, found end of input",
                                 toks[-1][1] if toks else 1,
                                 toks[-1][2] if toks else 1)
        tok, line, col = toks[i]
        i += 1
        return tok, line, col

    tok, line, col = expect("'graph'")
    if tok != "graph":
        raise DslSyntaxError(f"expected 'graph', found {tok!r}", line, col)
    name, line, col = expect("graph name")
    tok, line, col = expect("'{'")
    if tok != "{":
        raise DslSyntaxError(f"expected '{{', found {tok!r}", line, col)
    nodes: List[NodeId] = []
    directed, arcs = [], []

    def note(n):
        if n not in nodes:
            nodes.append(n)

    while True:
        tok, line, col = expect("statement or '}'")
        if tok == "}":
            break
        if tok == "node":
            n, line, col = expect("node name")
            note(n)
            semi, line, col = expect("';'")
            if semi != ";":
                raise DslSyntaxError("expected ';'", line, col)
            continue
        a = tok
        op, line, col = expect("'->' or '<->'")
        if op not in ("->", "<->"):
            raise DslSyntaxError(f"expected edge operator, found {op!r}",
                                 line, col)
        b, line, col = expect("node name")
        semi, line, col = expect("';'")
        if semi != ";":
            raise DslSyntaxError("expected ';'", line, col)
        note(a)
        note(b)
        if op == "->":
            directed.append((a, b))
        else:
            arcs.append((a, b))
    return name, CausalGraph.make(nodes, directed, arcs)


def print_graph(graph: CausalGraph, name: str = "g") -> str:
    lines = [f"graph {name} {{"]
    mentioned = set()
    for p, c in graph.directed_edges:
        lines.append(f"  {p} -> {c};")
        mentioned |= {p, c}
    for a, b in graph.bidirected_arcs:
        lines.append(f"  {a} <-> {b};")
        mentioned |= {a, b}
    for n in sorted(graph.visible - mentioned):
        lines.append(f"  node {n};")
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Query syntax


_QUERY = re.compile(r"^\s*P\s*\(([^)]*)\)\s*$", re.S)


def parse_query(text: str, graph: CausalGraph
                ) -> Tuple[frozenset, frozenset]:
    """Parse ``P(s... | do(t)...)`` into (s, t) node sets."""
    m = _QUERY.match(text)
    if not m:
        raise QueryError(f"not a query: {text!r}")
    inner = m.group(1)
    if "|" in inner:
        left, right = inner.split("|", 1)
    else:
        left, right = inner, ""
    s = frozenset(x.strip() for x in left.split(",") if x.strip())
    t = set()
    right = right.strip()
    while right:
        m2 = re.match(r"^do\s*\(\s*([A-Za-z0-9_]+)\s*\)\s*,?\s*", right)
        if not m2:
            raise QueryError(f"expected do(...) terms, found {right!r}")
        t.add(m2.group(1))
        right = right[m2.end():]
    t = frozenset(t)
    if not s:
        raise QueryError("empty outcome set")
    if s & t:
        raise QueryError("outcome and intervention sets overlap")
    unknown = (s | t) - graph.visible
    if unknown:
        raise QueryError(f"unknown nodes: {sorted(unknown)}")
    return s, t


# ---------------------------------------------------------------------------
# Estimand rendering and parsing


def _ref_text(slot: E.Slot) -> str:
    var, ref = slot
    if isinstance(ref, int):
        return f"{var}={ref}"
    return ref


def render_estimand(e: E.Estimand, style: str = "plain") -> str:
    if style == "plain":
        return _render_plain(e)
    if style == "latex":
        return _render_latex(e)
    raise ValueError(f"unknown style {style!r}")


def _render_factor(f: E.Estimand, plain: bool) -> str:
    inner = _render_plain(f) if plain else _render_latex(f)
    if isinstance(f, (E.Marg, E.Ratio)):
        if plain:
            return f"[ {inner} ]"
        return rf"\left[ {inner} \right]"
    return inner


def _render_plain(e: E.Estimand) -> str:
    if isinstance(e, E.Cond):
        tgt = ",".join(_ref_text(s) for s in e.target)
        if e.given:
            giv = ",".join(_ref_text(s) for s in e.given)
            return f"P({tgt}|{giv})"
        return f"P({tgt})"
    if isinstance(e, E.Prod):
        if not e.factors:
            return "1"
        return " ".join(_render_factor(f, True) for f in e.factors)
    if isinstance(e, E.Marg):
        return f"sum_{','.join(e.vars)} " + _render_factor_body(e.body, True)
    if isinstance(e, E.Ratio):
        return _render_factor_body(e.num, True) + " / " + \
            _render_factor_body(e.den, True)
    raise TypeError(type(e))


def _render_factor_body(e: E.Estimand, plain: bool) -> str:
    # the body of a sum or ratio half: products juxtapose, nested
    # sums/ratios keep their brackets
    if isinstance(e, E.Prod):
        return " ".join(_render_factor(f, plain) for f in e.factors)
    if isinstance(e, (E.Marg, E.Ratio)):
        return _render_factor(e, plain)
    return _render_plain(e) if plain else _render_latex(e)


def _render_latex(e: E.Estimand) -> str:
    if isinstance(e, E.Cond):
        tgt = ",".join(_ref_text(s) for s in e.target)
        if e.given:
            giv = ",".join(_ref_text(s) for s in e.given)
            return rf"P({tgt}\mid {giv})"
        return rf"P({tgt})"
    if isinstance(e, E.Prod):
        if not e.factors:
            return "1"
        return r"\, ".join(_render_factor(f, False) for f in e.factors)
    if isinstance(e, E.Marg):
        return rf"\sum_{{{','.join(e.vars)}}} " + \
            _render_factor_body(e.body, False)
    if isinstance(e, E.Ratio):
        return rf"\frac{{{_render_latex(e.num)}}}{{{_render_latex(e.den)}}}"
    raise TypeError(type(e))


_EST_TOKEN = re.compile(
    r"\s*(sum_[A-Za-z0-9_',]+|P\([^()]*\)|\[|\]|/|1)")


def parse_estimand(text: str) -> E.Estimand:
    """Parse the plain rendering back into a tree."""
    toks = []
    pos = 0
    while pos < len(text):
        if text[pos] in " \t\r\n":
            pos += 1
            continue
        m = _EST_TOKEN.match(text, pos)
        if not m:
            raise QueryError(f"bad estimand text at {text[pos:pos+20]!r}")
        toks.append(m.group(1))
        pos = m.end(1)
    i = 0

    def slot_of(txt: str) -> E.Slot:
        txt = txt.strip()
        if "=" in txt:
            var, val = txt.split("=", 1)
            return (var.strip(), int(val))
        var = txt.rstrip("'")
        return (var, txt)

    def parse_cond(tok: str) -> E.Cond:
        inner = tok[2:-1]
        if "|" in inner:
            left, right = inner.split("|", 1)
            given = tuple(slot_of(x) for x in right.split(",") if x.strip())
        else:
            left, given = inner, ()
        target = tuple(slot_of(x) for x in left.split(",") if x.strip())
        return E.Cond(tuple(sorted(target)),
                      tuple(sorted(given, key=lambda s: s[0])))

    def _finish(factors: List[E.Estimand]) -> E.Estimand:
        if not factors:
            return E.ONE
        if len(factors) == 1:
            return factors[0]
        return E.Prod(tuple(factors))

    def parse_factor() -> E.Estimand:
        nonlocal i
        tok = toks[i]
        if tok == "[":
            i += 1
            sub = parse_group(True)
            if i >= len(toks) or toks[i] != "]":
                raise QueryError("missing ']'")
            i += 1
            return sub
        if tok.startswith("sum_"):
            i += 1
            vars_ = tuple(tok[4:].split(","))
            return E.Marg(vars_, parse_sum_body())
        if tok == "1":
            i += 1
            return E.ONE
        if tok.startswith("P("):
            i += 1
            return parse_cond(tok)
        raise QueryError(f"unexpected token {tok!r}")

    def parse_sum_body() -> E.Estimand:
        # a sum's body runs to the end of the bracket group or to '/'
        factors: List[E.Estimand] = []
        while i < len(toks) and toks[i] not in ("]", "/"):
            factors.append(parse_factor())
        return _finish(factors)

    def parse_group(stop_at_bracket: bool) -> E.Estimand:
        nonlocal i
        factors: List[E.Estimand] = []
        while i < len(toks):
            tok = toks[i]
            if tok == "]":
                if not stop_at_bracket:
                    raise QueryError("unbalanced ']'")
                break
            if tok == "/":
                i += 1
                num = _finish(factors)
                return E.Ratio(num, parse_group(stop_at_bracket))
            factors.append(parse_factor())
        return _finish(factors)

    out = parse_group(False)
    if i != len(toks):
        raise QueryError("trailing estimand tokens")
    return out


# ---------------------------------------------------------------------------
# Model files


def model_to_json(model: DiscreteModel, graph_name: str = "g") -> str:
    doc = {
        "graph": {
            "name": graph_name,
            "nodes": sorted(model.graph.visible),
            "directed": [list(e) for e in model.graph.directed_edges],
            "bidirected": [list(a) for a in model.graph.bidirected_arcs],
        },
        "cardinality": {n: int(model.cardinality[n])
                        for n in model.node_order()},
        "cpts": {},
    }
    for node in model.node_order():
        parents = model.parent_order(node)
        cpt = model.cpts[node]
        # store row-major over parent tuples: axes (parents..., node)
        table = np.moveaxis(cpt, 0, -1).reshape(-1).tolist()
        doc["cpts"][node] = {"parents": parents, "table": table}
    return json.dumps(doc, indent=2)


def model_from_json(text: str) -> DiscreteModel:
    try:
        doc = json.loads(text)
        g = CausalGraph.make(doc["graph"]["nodes"],
                             [tuple(e) for e in doc["graph"]["directed"]],
                             [tuple(a) for a in doc["graph"]["bidirected"]])
        card = {str(k): int(v) for k, v in doc["cardinality"].items()}
        cpts: Dict[str, np.ndarray] = {}
        probe = DiscreteModel.__new__(DiscreteModel)
        probe.graph = g
        from .graph import latent_expand
        probe.expanded = latent_expand(g)
        probe._latent_order = [u for _, u in probe.expanded.latent_of_arc]
        for node, spec in doc["cpts"].items():
            parents = [str(p) for p in spec["parents"]]
            want = probe.parent_order(node)
            if parents != want:
                raise ValueError(
                    f"parents of {node} must be {want}, got {parents}")
            shape = [card[p] for p in parents] + [card[node]]
            arr = np.array(spec["table"], dtype=float).reshape(shape)
            cpts[node] = np.moveaxis(arr, -1, 0)
        return DiscreteModel(g, card, cpts)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"bad model file: {exc}") from exc
