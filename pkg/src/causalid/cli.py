"""Command-line surface.

Exit codes are a stable contract: 0 identifiable / success, 1 usage or
parse error, 2 not identifiable, 3 verification tolerance exceeded.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import List, Optional

import numpy as np

from . import counterexamples as CX
from . import dsl
from .estimand import free_vars
from .graph import CausalGraph, GraphError
from .identify import Identifiable, IdentifyTrace, NotIdentifiable, pv_express
from .inference import (DiscreteModel, ZeroDenominator, do_distribution,
                        evaluate_estimand, info_measures, observed_marginal,
                        random_model)


def _load_graph(path: str) -> CausalGraph:
    with open(path) as fh:
        _, g = dsl.parse_graph(fh.read())
    return g


def _trace_json(trace: IdentifyTrace) -> dict:
    doc = {
        "version": "v1",
        "steps": [
            {
                "sigma": sorted(s.sigma),
                "beta": sorted(s.beta),
                "d": sorted(s.d),
                "component": sorted(s.component),
                "dcomp": sorted(s.dcomp),
                "action": s.action,
            }
            for s in trace.steps
        ],
    }
    if trace.identifiable:
        doc["verdict"] = "identifiable"
        doc["estimand"] = dsl.render_estimand(trace.verdict.estimand)
    else:
        doc["verdict"] = "not-identifiable"
        doc["witness"] = {
            "d": sorted(trace.verdict.witness_d),
            "graph": dsl.print_graph(trace.verdict.witness_graph,
                                     "witness"),
            "reason": trace.verdict.reason,
        }
    return doc


def _match_catalog(graph: CausalGraph, s, t) -> Optional[CX.CatalogEntry]:
    for entry in CX.paper_graph_catalog():
        if (entry.graph.visible == graph.visible
                and set(entry.graph.directed_edges) ==
                set(graph.directed_edges)
                and set(entry.graph.bidirected_arcs) ==
                set(graph.bidirected_arcs)
                and entry.s == s and entry.t == t):
            return entry
    return None


def cmd_identify(args) -> int:
    try:
        graph = _load_graph(args.graph)
        s, t = dsl.parse_query(args.query, graph)
    except (OSError, dsl.DslSyntaxError, dsl.QueryError, GraphError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    trace = pv_express(graph, s, t, graph.visible)
    if args.format == "trace-json":
        print(json.dumps(_trace_json(trace), indent=2))
        return 0 if trace.identifiable else 2
    if trace.identifiable:
        print(dsl.render_estimand(trace.verdict.estimand, args.format))
        return 0
    v = trace.verdict
    print("NOT-IDENTIFIABLE")
    print(f"witness outcome block: {sorted(v.witness_d)}")
    print("witness graph:")
    print(dsl.print_graph(v.witness_graph, "witness"), end="")
    entry = _match_catalog(graph, s, t)
    if entry is not None and entry.certificate is not None:
        print(f"certificate: {entry.name}")
    return 2


def cmd_verify(args) -> int:
    try:
        graph = _load_graph(args.graph)
        s, t = dsl.parse_query(args.query, graph)
    except (OSError, dsl.DslSyntaxError, dsl.QueryError, GraphError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    trace = pv_express(graph, s, t, graph.visible)
    tol = args.tolerance
    worst = 0.0
    failed = False
    if trace.identifiable:
        est = trace.verdict.estimand
        print(f"identifiable; estimand: {dsl.render_estimand(est)}")
        for k in range(args.trials):
            model = random_model(graph, 2, args.seed + k)
            obs = observed_marginal(model)
            got = evaluate_estimand(est, obs)
            want = do_distribution(model, s, t)
            scope = got.scope
            perm = [want.scope.index(v) for v in scope]
            w = np.moveaxis(want.values, perm, range(len(scope)))
            gap = float(np.abs(got.values - w).max())
            worst = max(worst, gap)
            status = "ok" if gap <= tol else "FAIL"
            print(f"trial {k}: seed={args.seed + k} max-gap={gap:.3e} "
                  f"{status}")
            if gap > tol:
                failed = True
        print(f"worst gap over {args.trials} trials: {worst:.3e}")
    else:
        print("not identifiable; searching for a negative-information "
              "witness")
        best = None
        for k in range(args.trials):
            model = random_model(graph, 2, args.seed + k)
            rep = info_measures(model, s, t)
            if best is None or rep.h_uprooted_mi < best:
                best = rep.h_uprooted_mi
            print(f"trial {k}: seed={args.seed + k} "
                  f"H(s:t-hat)={rep.h_uprooted_mi:+.12f}")
        if best is not None:
            print(f"minimum over trials: {best:+.12f}")
        entry = _match_catalog(graph, s, t)
        if entry is not None and entry.negative_witness is not None:
            rep = info_measures(entry.negative_witness(), s, t)
            print(f"catalog witness {entry.name}: "
                  f"H(s:t-hat)={rep.h_uprooted_mi:+.12f}")
        if entry is not None and entry.certificate is not None:
            pair = entry.certificate()
            oa = observed_marginal(pair.model_a)
            ob = observed_marginal(pair.model_b)
            obs_gap = float(np.abs(oa.values - ob.values).max())
            da = do_distribution(pair.model_a, pair.s, pair.t)
            db = do_distribution(pair.model_b, pair.s, pair.t)
            do_gap = float(np.abs(da.values - db.values).max())
            print(f"certificate replay: observed max-gap={obs_gap:.3e} "
                  f"interventional max-gap={do_gap:.3e}")
            if obs_gap > tol or do_gap < 1e-3:
                failed = True
    return 3 if failed else 0


def cmd_info(args) -> int:
    try:
        graph = _load_graph(args.graph)
        with open(args.model) as fh:
            model = dsl.model_from_json(fh.read())
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if (model.graph.visible != graph.visible
            or set(model.graph.directed_edges) != set(graph.directed_edges)
            or set(model.graph.bidirected_arcs) !=
            set(graph.bidirected_arcs)):
        print("error: model file does not match the graph", file=sys.stderr)
        return 1
    b = frozenset(x for x in args.b.split(",") if x)
    a = frozenset(x for x in args.a.split(",") if x)
    e = frozenset(x for x in (args.e or "").split(",") if x)
    rep = info_measures(model, b, a, e)
    print(f"h_mi            = {rep.h_mi:+.12f}")
    print(f"h_uprooted_mi   = {rep.h_uprooted_mi:+.12f}")
    print(f"h_cmi           = {rep.h_cmi:+.12f}")
    print(f"h_uprooted_cmi  = {rep.h_uprooted_cmi:+.12f}")
    print(f"loss_mi         = {rep.loss_mi:+.12f}")
    print(f"loss_cmi        = {rep.loss_cmi:+.12f}")
    print(f"identity check  = {rep.h_uprooted_cmi + rep.loss_cmi - rep.h_cmi:+.3e}")
    return 0


def _emit_entry(entry: CX.CatalogEntry) -> None:
    print(f"# {entry.name}")
    print(dsl.print_graph(entry.graph, entry.name), end="")
    do_part = ", ".join(f"do({v})" for v in sorted(entry.t))
    s_part = ", ".join(sorted(entry.s))
    print(f"query: P({s_part} | {do_part})" if do_part
          else f"query: P({s_part})")
    print(f"expected: {'identifiable' if entry.identifiable else 'not-identifiable'}")
    if entry.certificate is not None:
        pair = entry.certificate()
        print(f"model file ({entry.name}, certificate side A):")
        print(dsl.model_to_json(pair.model_a, entry.name))
        print(f"model file ({entry.name}, certificate side B):")
        print(dsl.model_to_json(pair.model_b, entry.name))
    print()


def cmd_examples(args) -> int:
    if args.name == "all":
        for entry in CX.paper_graph_catalog():
            _emit_entry(entry)
        return 0
    try:
        entry = CX.catalog_entry(args.name)
    except KeyError:
        print(f"error: unknown example {args.name!r}", file=sys.stderr)
        return 1
    _emit_entry(entry)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="causalid",
        description="identify interventional queries on semi-Markovian "
                    "causal graphs and evaluate uprooted information")
    sub = p.add_subparsers(dest="command", required=True)

    pi = sub.add_parser("identify", help="compile a query to an estimand")
    pi.add_argument("--graph", required=True)
    pi.add_argument("--query", required=True)
    pi.add_argument("--format", default="plain",
                    choices=["plain", "latex", "trace-json"])
    pi.set_defaults(func=cmd_identify)

    pv = sub.add_parser("verify", help="randomized verification")
    pv.add_argument("--graph", required=True)
    pv.add_argument("--query", required=True)
    pv.add_argument("--trials", type=int, default=20)
    pv.add_argument("--seed", type=int, default=0)
    pv.add_argument("--tolerance", type=float, default=1e-9)
    pv.set_defaults(func=cmd_verify)

    pf = sub.add_parser("info", help="information measures on a model")
    pf.add_argument("--graph", required=True)
    pf.add_argument("--model", required=True)
    pf.add_argument("--b", required=True)
    pf.add_argument("--a", required=True)
    pf.add_argument("--e", default="")
    pf.set_defaults(func=cmd_info)

    pe = sub.add_parser("examples", help="emit catalog entries")
    pe.add_argument("--name", required=True)
    pe.set_defaults(func=cmd_examples)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
