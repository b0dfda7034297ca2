"""Causal abstraction toolkit for finite-domain structural causal models."""

from .abstraction import (
    Abstraction,
    ConsistencyReport,
    abstraction_error,
    canonical_alpha,
    check_inequality_preservation,
    construct_abstract_scm,
    pushforward,
    recover_structure,
)
from .clustering import (
    ClusterGraph,
    Clustering,
    build_cdag,
    build_pcdag,
    check_graphical_consistency,
    cluster_d_sep_check,
    do_calculus_applicable,
    validate_clustering,
)
from .graph import (
    CausalGraph,
    confounding_link,
    d_separated,
    graph_surgery,
    induced_graph,
    is_acyclic,
    mediated_adjacent,
    to_dot,
)
from .scm import (
    Distribution,
    Mechanism,
    Scm,
    Variable,
    Violation,
    condition,
    intervene,
    interventional_query,
    joint_distribution,
    marginalize,
    validate_scm,
)
from .harness import GenParams, random_clustering, random_scm, run_theorem_suite
from .tau import check_tau_compatibility, derive_tau, minimal_exogenous_classes

__version__ = "0.1.0"

__all__ = [
    "Abstraction",
    "ConsistencyReport",
    "abstraction_error",
    "canonical_alpha",
    "check_inequality_preservation",
    "construct_abstract_scm",
    "pushforward",
    "recover_structure",
    "ClusterGraph",
    "Clustering",
    "build_cdag",
    "build_pcdag",
    "check_graphical_consistency",
    "cluster_d_sep_check",
    "do_calculus_applicable",
    "validate_clustering",
    "CausalGraph",
    "confounding_link",
    "d_separated",
    "graph_surgery",
    "induced_graph",
    "is_acyclic",
    "mediated_adjacent",
    "to_dot",
    "Distribution",
    "Mechanism",
    "Scm",
    "Variable",
    "Violation",
    "condition",
    "intervene",
    "interventional_query",
    "joint_distribution",
    "marginalize",
    "validate_scm",
    "GenParams",
    "random_clustering",
    "random_scm",
    "run_theorem_suite",
    "check_tau_compatibility",
    "derive_tau",
    "minimal_exogenous_classes",
]
