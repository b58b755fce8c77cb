"""Evaluating predicted rankings against reference relevance.

Precision/recall at K treat each target task as a retrieval query whose
relevant set is externally supplied (for instance the top-5 sources of a
reference transfer study). The task tree clusters an all-pairs score
matrix agglomeratively with average linkage on the normalized distance
``d = 1 - score / (1 + lambda)``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DeparaError
from .ranking import RankingTable
from .similarity import spearman


@dataclass(frozen=True)
class RelevanceSet:
    query_id: str
    relevant_ids: frozenset[str]

    def __post_init__(self):
        object.__setattr__(self, "relevant_ids", frozenset(str(x) for x in self.relevant_ids))
        if not self.relevant_ids:
            raise DeparaError(f"relevance set for query '{self.query_id}' is empty")


def _hits(ranking: RankingTable, rel: RelevanceSet, k: int) -> int:
    k = int(k)
    if not 1 <= k <= len(ranking.entries):
        raise DeparaError(f"k={k} out of range [1, {len(ranking.entries)}]")
    return sum(1 for entry in ranking.entries[:k] if entry.candidate_id in rel.relevant_ids)


def precision_at_k(ranking: RankingTable, rel: RelevanceSet, k: int) -> float:
    """|top-k intersect relevant| / k."""
    return _hits(ranking, rel, k) / k


def recall_at_k(ranking: RankingTable, rel: RelevanceSet, k: int) -> float:
    """|top-k intersect relevant| / |relevant|."""
    return _hits(ranking, rel, k) / len(rel.relevant_ids)


@dataclass(frozen=True)
class PrPoint:
    k: int
    precision: float
    recall: float


@dataclass(frozen=True)
class PrCurve:
    """Macro-averaged precision/recall for K = 1..max, recall non-decreasing."""

    points: tuple[PrPoint, ...]

    def to_dict(self) -> dict:
        return {"points": [{"k": p.k, "precision": p.precision, "recall": p.recall} for p in self.points]}

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["k", "precision", "recall"])
        for p in self.points:
            writer.writerow([p.k, f"{p.precision:.9g}", f"{p.recall:.9g}"])
        return buf.getvalue()

    def to_svg(self) -> str:
        return _pr_curve_svg(self.points)


def pr_curve(rankings: Sequence[RankingTable], rels: Sequence[RelevanceSet]) -> PrCurve:
    """Average precision and recall over queries at every cutoff K.

    Queries are matched by id; every ranking needs a relevance set and
    vice versa, and all rankings must list the same number of candidates.
    """
    by_query = {}
    for rel in rels:
        if rel.query_id in by_query:
            raise DeparaError(f"duplicate relevance set for query '{rel.query_id}'")
        by_query[rel.query_id] = rel
    if not rankings:
        raise DeparaError("no rankings supplied")
    seen = set()
    for table in rankings:
        if table.target_id not in by_query:
            raise DeparaError(f"missing relevance set for query '{table.target_id}'")
        seen.add(table.target_id)
    for query_id in by_query:
        if query_id not in seen:
            raise DeparaError(f"missing ranking for query '{query_id}'")
    counts = {len(table.entries) for table in rankings}
    if len(counts) != 1:
        raise DeparaError(f"rankings disagree on candidate count: {sorted(counts)}")
    max_k = counts.pop()
    points = []
    for k in range(1, max_k + 1):
        precisions = []
        recalls = []
        for table in rankings:
            rel = by_query[table.target_id]
            precisions.append(precision_at_k(table, rel, k))
            recalls.append(recall_at_k(table, rel, k))
        points.append(PrPoint(k=k, precision=float(np.mean(precisions)), recall=float(np.mean(recalls))))
    return PrCurve(points=tuple(points))


def sim_accuracy_correlation(sims: Sequence[float], accs: Sequence[float]) -> float:
    """Spearman correlation between similarity scores and external accuracies."""
    s = np.asarray(sims, dtype=np.float64)
    a = np.asarray(accs, dtype=np.float64)
    if s.shape != a.shape or s.ndim != 1:
        raise DeparaError(f"need two equal-length 1-D sequences, got {s.shape} and {a.shape}")
    if s.size < 3:
        raise DeparaError(f"need at least 3 paired observations, got {s.size}")
    return spearman(s, a)


@dataclass(frozen=True)
class DendrogramNode:
    """Leaf (id set, no children) or merge (two children, merge height)."""

    height: float
    id: str | None = None
    children: tuple["DendrogramNode", ...] = ()

    @property
    def is_leaf(self) -> bool:
        return self.id is not None

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"id": self.id}
        return {"height": self.height, "children": [child.to_dict() for child in self.children]}


@dataclass(frozen=True)
class Dendrogram:
    root: DendrogramNode
    ids: tuple[str, ...]
    lam: float

    def to_dict(self) -> dict:
        return {
            "linkage": "average",
            "distance": "1 - score / (1 + lambda)",
            "lambda": self.lam,
            "ids": list(self.ids),
            "tree": self.root.to_dict(),
        }

    def to_newick(self) -> str:
        return _newick(self.root, None) + ";"


def _newick_label(raw: str) -> str:
    if any(ch in raw for ch in " ,():;'\t\n[]"):
        return "'" + raw.replace("'", "''") + "'"
    return raw


def _newick(node: DendrogramNode, parent_height: float | None) -> str:
    if node.is_leaf:
        body = _newick_label(node.id)
    else:
        body = "(" + ",".join(_newick(child, node.height) for child in node.children) + ")"
    if parent_height is None:
        return body
    return f"{body}:{parent_height - node.height:.9g}"


def task_tree(matrix, ids: Sequence[str], lam: float = 1.0) -> Dendrogram:
    """Average-linkage agglomerative clustering of an all-pairs score matrix.

    Deterministic: the closest pair merges first, distance ties resolved
    by the lexicographically smallest pair of cluster representatives
    (a cluster is represented by its smallest member id).
    """
    scores = np.asarray(matrix, dtype=np.float64)
    ids = [str(x) for x in ids]
    if len(set(ids)) != len(ids):
        raise DeparaError("duplicate task ids")
    n = len(ids)
    if scores.shape != (n, n):
        raise DeparaError(f"matrix shape {scores.shape} does not match {n} task ids")
    if n == 0:
        raise DeparaError("no tasks to cluster")
    deviation = float(np.max(np.abs(scores - scores.T))) if n > 1 else 0.0
    if deviation > 1e-9:
        raise DeparaError(f"asymmetric matrix: max deviation {deviation:.3g} exceeds 1e-9")
    lam = float(lam)
    dist = 1.0 - scores / (1.0 + lam)
    dist = (dist + dist.T) / 2.0

    leaves = [DendrogramNode(height=0.0, id=task_id) for task_id in ids]
    if n == 1:
        return Dendrogram(root=leaves[0], ids=tuple(ids), lam=lam)

    clusters = [(frozenset([i]), ids[i], leaves[i]) for i in range(n)]  # (members, rep, node)
    last_height = 0.0
    while len(clusters) > 1:
        best = None
        for i in range(len(clusters)):
            for j in range(i + 1, len(clusters)):
                members_i, rep_i, _ = clusters[i]
                members_j, rep_j, _ = clusters[j]
                d = float(np.mean(dist[np.ix_(sorted(members_i), sorted(members_j))]))
                key = (d, min(rep_i, rep_j), max(rep_i, rep_j))
                if best is None or key < best[0]:
                    best = (key, i, j)
        (d, _, _), i, j = best
        members_i, rep_i, node_i = clusters[i]
        members_j, rep_j, node_j = clusters[j]
        height = max(d, last_height)  # average linkage is monotone; guard fp jitter
        last_height = height
        left, right = ((node_i, node_j) if rep_i <= rep_j else (node_j, node_i))
        merged = DendrogramNode(height=height, children=(left, right))
        rep = min(rep_i, rep_j)
        clusters = [c for idx, c in enumerate(clusters) if idx not in (i, j)]
        clusters.append((members_i | members_j, rep, merged))
    return Dendrogram(root=clusters[0][2], ids=tuple(ids), lam=lam)


def _pr_curve_svg(points: Iterable[PrPoint]) -> str:
    """Minimal deterministic SVG line plot of precision vs recall."""
    width, height, margin = 480, 360, 48

    def sx(recall: float) -> float:
        return margin + recall * (width - 2 * margin)

    def sy(precision: float) -> float:
        return height - margin - precision * (height - 2 * margin)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" y2="{height - margin}" '
        'stroke="black" stroke-width="1"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" '
        'stroke="black" stroke-width="1"/>',
    ]
    for tick in (0.0, 0.5, 1.0):
        x, y = sx(tick), sy(tick)
        parts.append(
            f'<text x="{x:.1f}" y="{height - margin + 16}" font-size="11" '
            f'text-anchor="middle">{tick:g}</text>'
        )
        parts.append(
            f'<text x="{margin - 8}" y="{y + 4:.1f}" font-size="11" text-anchor="end">{tick:g}</text>'
        )
    parts.append(
        f'<text x="{width / 2:.1f}" y="{height - 10}" font-size="12" text-anchor="middle">recall</text>'
    )
    parts.append(
        f'<text x="14" y="{height / 2:.1f}" font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 14 {height / 2:.1f})">precision</text>'
    )
    coords = [(sx(p.recall), sy(p.precision)) for p in points]
    if coords:
        path = " ".join(f"{x:.2f},{y:.2f}" for x, y in coords)
        parts.append(f'<polyline points="{path}" fill="none" stroke="#1f6fb2" stroke-width="1.5"/>')
        for x, y in coords:
            parts.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="2.5" fill="#1f6fb2"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
