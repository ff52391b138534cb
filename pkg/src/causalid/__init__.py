"""Identifiability of interventional queries on semi-Markovian causal
graphs, estimand compilation, two-model counterexamples, and the
uprooted-information measures on exact discrete models."""

from .graph import (CausalGraph, CycleDetected, DanglingNode, DuplicateEdge,
                    ExpandedGraph, GraphError, ancestral_closure,
                    c_components, induced_subgraph, latent_expand, mutilate,
                    topological_order, validate)
from .dsep import RulePremiseQuery, d_separated, rule2_premise, rule3_premise
from .identify import (Identifiable, IdentifyTrace, InvalidBlock,
                       NotIdentifiable, graphical_condition, prune_query,
                       pv_express, pv_express_one, q_chain_expand,
                       upsilon_decompose)
from .inference import (DiscreteModel, InfoReport, JointTable,
                        StateSpaceTooLarge, SupportMismatch, ZeroDenominator,
                        do_distribution, evaluate_estimand, info_measures,
                        joint, observed_marginal, random_model,
                        relative_entropy)
from .counterexamples import (CounterexamplePair, InvalidG0, RotationKit,
                              indef_model, modified_shark_teeth_model,
                              one_tooth_pair, one_tooth_xor_model,
                              paper_graph_catalog, shark_teeth_certificate,
                              shark_teeth_model, shark_teeth_xor_model,
                              tp_fig9_model, zero_info_model)

__all__ = [n for n in dir() if not n.startswith("_")]
__version__ = "0.1.0"
