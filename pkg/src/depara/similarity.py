"""Similarity between attribution graphs.

The score of a pair of graphs decomposes into a node term (mean cosine
between paired attribution maps, capturing whether the two layers focus
on the same input dimensions) and an edge term (Spearman correlation
between the two edge vectors, capturing whether the embedding spaces
share topology), combined as ``score = s_nodes + lambda * s_edges``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DeparaError
from .graph import DeparaGraph


def average_ranks(values) -> np.ndarray:
    """1-based ranks of a sequence; tied values share their average rank."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise DeparaError(f"ranks are defined for 1-D sequences, got shape {v.shape}")
    m = v.size
    if m == 0:
        raise DeparaError("cannot rank an empty sequence")
    order = np.argsort(v, kind="stable")
    sorted_v = v[order]
    change = np.empty(m, dtype=bool)
    change[0] = True
    change[1:] = sorted_v[1:] != sorted_v[:-1]
    starts = np.flatnonzero(change)
    ends = np.append(starts[1:], m)
    run_rank = (starts + ends + 1) * 0.5  # mean of ranks starts+1 .. ends
    ranks = np.empty(m, dtype=np.float64)
    ranks[order] = run_rank[np.cumsum(change) - 1]
    return ranks


def spearman(x, y) -> float:
    """Tie-aware Spearman coefficient: Pearson correlation of average ranks.

    Reduces to ``1 - 6 * sum(d^2) / (m^3 - m)`` when there are no ties.
    """
    xv = np.asarray(x, dtype=np.float64)
    yv = np.asarray(y, dtype=np.float64)
    if xv.shape != yv.shape or xv.ndim != 1:
        raise DeparaError(f"spearman needs two 1-D sequences of equal length, got {xv.shape} and {yv.shape}")
    if xv.size < 2:
        raise DeparaError("spearman needs at least 2 paired values")
    if not (np.isfinite(xv).all() and np.isfinite(yv).all()):
        raise DeparaError("non-finite value in spearman input")
    rx = average_ranks(xv)
    ry = average_ranks(yv)
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    ssx = float(dx @ dx)
    ssy = float(dy @ dy)
    if ssx == 0.0 or ssy == 0.0:
        raise DeparaError("degenerate rank distribution: constant input")
    r = float(dx @ dy) / math.sqrt(ssx * ssy)
    return min(1.0, max(-1.0, r))


@dataclass(frozen=True)
class SimilarityReport:
    """Node/edge similarity terms and the combined score for one lambda."""

    s_nodes: float | None
    s_edges: float
    lam: float
    score: float

    def to_dict(self) -> dict:
        return {"s_nodes": self.s_nodes, "s_edges": self.s_edges, "lambda": self.lam, "score": self.score}


def _require_comparable(a: DeparaGraph, b: DeparaGraph) -> None:
    if a.probe_id != b.probe_id or a.n != b.n:
        raise DeparaError(
            "incomparable graphs: "
            f"probe '{a.probe_id}' (n={a.n}) vs probe '{b.probe_id}' (n={b.n})"
        )


def node_similarity(a: DeparaGraph, b: DeparaGraph) -> float:
    """Mean cosine between paired attribution maps, in [-1, 1]."""
    _require_comparable(a, b)
    if a.d_input != b.d_input:
        raise DeparaError(f"node dimensions differ: {a.d_input} vs {b.d_input}")
    va = a.nodes.astype(np.float64)
    vb = b.nodes.astype(np.float64)
    norm_a = np.sqrt(np.einsum("ij,ij->i", va, va))
    norm_b = np.sqrt(np.einsum("ij,ij->i", vb, vb))
    for graph, norms in ((a, norm_a), (b, norm_b)):
        zero = np.flatnonzero(norms == 0.0)
        if zero.size:
            raise DeparaError(
                f"zero node vector at probe index {int(zero[0])} in graph '{graph.label}'"
            )
    cosines = np.clip(np.einsum("ij,ij->i", va, vb) / (norm_a * norm_b), -1.0, 1.0)
    return float(cosines.mean())


def edge_similarity(a: DeparaGraph, b: DeparaGraph) -> float:
    """Spearman correlation of the paired edge vectors, in [-1, 1]."""
    _require_comparable(a, b)
    for graph in (a, b):
        if graph.edges.size == 0 or np.all(graph.edges == graph.edges[0]):
            raise DeparaError(
                f"degenerate edge distribution in graph '{graph.label}': no rank variance"
            )
    return spearman(a.edges, b.edges)


def graph_similarity(a: DeparaGraph, b: DeparaGraph, lam: float = 1.0, *,
                     edges_only: bool = False) -> SimilarityReport:
    """Full similarity report: ``score = s_nodes + lam * s_edges``.

    With ``edges_only`` the node term is skipped (useful when the two
    graphs live in input spaces of different dimensionality), s_nodes is
    reported as None and the score is ``lam * s_edges``.
    """
    lam = float(lam)
    if not math.isfinite(lam) or lam < 0.0:
        raise DeparaError(f"lambda must be a non-negative real, got {lam}")
    s_edges = edge_similarity(a, b)
    if edges_only:
        return SimilarityReport(s_nodes=None, s_edges=s_edges, lam=lam, score=lam * s_edges)
    s_nodes = node_similarity(a, b)
    return SimilarityReport(s_nodes=s_nodes, s_edges=s_edges, lam=lam, score=s_nodes + lam * s_edges)
