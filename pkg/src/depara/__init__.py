"""Attribution-graph toolkit for ranking transferable models and layers.

The pipeline: export a probe bundle per (model, layer), build a graph
whose nodes are Gradient*Input attribution maps and whose edges are
embedding cosine similarities, then compare graphs with
``score = s_nodes + lambda * s_edges`` to rank candidate sources.
"""

from .bundles import (
    BUNDLE_MAGIC,
    DTYPE_TAG,
    FORMAT_VERSION,
    ProbeBundle,
    bundle_checksum,
    load_bundle,
    read_bundle,
    save_bundle,
    write_bundle,
)
from .errors import DeparaError, FormatError
from .evaluation import (
    Dendrogram,
    DendrogramNode,
    PrCurve,
    PrPoint,
    RelevanceSet,
    pr_curve,
    precision_at_k,
    recall_at_k,
    sim_accuracy_correlation,
    task_tree,
)
from .graph import DeparaGraph, build_graph, edge_index
from .ranking import (
    KnowledgePool,
    LayerSelection,
    RankEntry,
    RankingTable,
    all_pairs_matrix,
    matrix_to_csv,
    rank_by_risk,
    rank_by_score,
    rank_by_similarity,
    select_layer,
)
from .refnet import (
    ACTIVATIONS,
    REFNET_MAGIC,
    Layer,
    RefNet,
    attribution,
    dense_net,
    export_bundle,
    forward,
    grad_sq_norm,
    load_refnet,
    read_refnet,
    save_refnet,
    write_refnet,
)
from .rng import Xoshiro256StarStar
from .similarity import (
    SimilarityReport,
    average_ranks,
    edge_similarity,
    graph_similarity,
    node_similarity,
    spearman,
)
from .synth import SynthFamily, SynthVariant, emit_family, generate_family, monotonicity_harness

__version__ = "0.1.0"

__all__ = [
    "ACTIVATIONS",
    "BUNDLE_MAGIC",
    "DTYPE_TAG",
    "FORMAT_VERSION",
    "REFNET_MAGIC",
    "Dendrogram",
    "DendrogramNode",
    "DeparaError",
    "DeparaGraph",
    "FormatError",
    "KnowledgePool",
    "Layer",
    "LayerSelection",
    "PrCurve",
    "PrPoint",
    "ProbeBundle",
    "RankEntry",
    "RankingTable",
    "RefNet",
    "RelevanceSet",
    "SimilarityReport",
    "SynthFamily",
    "SynthVariant",
    "Xoshiro256StarStar",
    "all_pairs_matrix",
    "attribution",
    "average_ranks",
    "build_graph",
    "bundle_checksum",
    "dense_net",
    "edge_index",
    "edge_similarity",
    "emit_family",
    "export_bundle",
    "forward",
    "generate_family",
    "grad_sq_norm",
    "graph_similarity",
    "load_bundle",
    "load_refnet",
    "matrix_to_csv",
    "monotonicity_harness",
    "node_similarity",
    "pr_curve",
    "precision_at_k",
    "rank_by_risk",
    "rank_by_score",
    "rank_by_similarity",
    "read_bundle",
    "read_refnet",
    "recall_at_k",
    "save_bundle",
    "save_refnet",
    "select_layer",
    "sim_accuracy_correlation",
    "spearman",
    "task_tree",
    "write_bundle",
    "write_refnet",
]
