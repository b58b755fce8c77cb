"""Turning pairwise similarities into decisions.

Candidates (models or layers) are ranked by descending graph similarity
to the target; when external accuracy/risk figures exist, candidates are
ranked by ascending risk instead. Both tables use competition ranking:
tied scores share a rank, the next distinct score gets 1 + the number of
strictly better candidates, and exact ties keep their input order.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .errors import DeparaError
from .graph import DeparaGraph
from .similarity import graph_similarity

DESCENDING_BY_SCORE = "descending_by_score"
ASCENDING_BY_RISK = "ascending_by_risk"


@dataclass(frozen=True)
class RankEntry:
    candidate_id: str
    score: float
    rank: int


@dataclass(frozen=True)
class RankingTable:
    target_id: str
    direction: str
    entries: tuple[RankEntry, ...]

    def ordered_ids(self) -> list[str]:
        return [entry.candidate_id for entry in self.entries]

    def to_dict(self) -> dict:
        return {
            "target_id": self.target_id,
            "direction": self.direction,
            "entries": [
                {"candidate_id": e.candidate_id, "score": e.score, "rank": e.rank}
                for e in self.entries
            ],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["candidate_id", "score", "rank"])
        for e in self.entries:
            writer.writerow([e.candidate_id, f"{e.score:.9g}", e.rank])
        return buf.getvalue()


@dataclass(frozen=True)
class LayerSelection:
    """Argmax layer choice; ``tied`` flags an exact score tie at the top."""

    candidate_id: str
    score: float
    tied: bool


@dataclass(frozen=True)
class KnowledgePool:
    """Candidate graphs sharing one probe set."""

    items: tuple[tuple[str, DeparaGraph], ...]

    def __post_init__(self):
        items = tuple((str(cid), graph) for cid, graph in self.items)
        object.__setattr__(self, "items", items)
        if items:
            ref_id, ref = items[0]
            for cid, graph in items[1:]:
                if graph.probe_id != ref.probe_id or graph.n != ref.n:
                    raise DeparaError(
                        f"pool items disagree on probe identity: '{cid}' has probe "
                        f"'{graph.probe_id}' (n={graph.n}), '{ref_id}' has "
                        f"'{ref.probe_id}' (n={ref.n})"
                    )

    @property
    def ids(self) -> list[str]:
        return [cid for cid, _ in self.items]

    def __len__(self) -> int:
        return len(self.items)


def _competition_table(target_id: str, scored: Sequence[tuple[str, float]], direction: str) -> RankingTable:
    if not scored:
        raise DeparaError("empty candidate list")
    for cid, value in scored:
        if not math.isfinite(value):
            raise DeparaError(f"non-finite score for candidate '{cid}'")
    descending = direction == DESCENDING_BY_SCORE
    order = sorted(range(len(scored)), key=lambda i: -scored[i][1] if descending else scored[i][1])
    entries = []
    previous = None
    rank = 0
    for position, i in enumerate(order, start=1):
        cid, value = scored[i]
        if previous is None or value != previous:
            rank = position
        previous = value
        entries.append(RankEntry(candidate_id=cid, score=float(value), rank=rank))
    return RankingTable(target_id=target_id, direction=direction, entries=tuple(entries))


def rank_by_score(target_id: str, scored: Sequence[tuple[str, float]]) -> RankingTable:
    """Rank candidates by descending score (rank 1 = highest score)."""
    return _competition_table(target_id, scored, DESCENDING_BY_SCORE)


def rank_by_risk(candidates: Sequence[tuple[str, float]], target_id: str = "") -> RankingTable:
    """Rank candidates by ascending risk (rank 1 = lowest risk)."""
    for cid, risk in candidates:
        if math.isnan(risk):
            raise DeparaError(f"NaN risk for candidate '{cid}'")
    return _competition_table(target_id, candidates, ASCENDING_BY_RISK)


def _scored_pool(pool: KnowledgePool, target: DeparaGraph, lam: float, edges_only: bool) -> list[tuple[str, float]]:
    if not pool.items:
        raise DeparaError("empty knowledge pool")
    scored = []
    for cid, graph in pool.items:
        try:
            report = graph_similarity(graph, target, lam, edges_only=edges_only)
        except DeparaError as exc:
            raise DeparaError(f"candidate '{cid}': {exc}") from exc
        scored.append((cid, report.score))
    return scored


def rank_by_similarity(pool: KnowledgePool, target: DeparaGraph, lam: float = 1.0, *,
                       edges_only: bool = False, target_id: str | None = None) -> RankingTable:
    """Rank pool candidates by descending similarity to the target graph."""
    scored = _scored_pool(pool, target, lam, edges_only)
    return rank_by_score(target_id if target_id is not None else target.label, scored)


def select_layer(layers: KnowledgePool, target_encoder: DeparaGraph, lam: float = 1.0) -> LayerSelection:
    """Pick the layer whose graph is most similar to the target encoder graph.

    Exact score ties resolve to the earliest pool item and set ``tied``.
    """
    table = rank_by_similarity(layers, target_encoder, lam)
    best = table.entries[0]
    tied = len(table.entries) > 1 and table.entries[1].score == best.score
    return LayerSelection(candidate_id=best.candidate_id, score=best.score, tied=tied)


def all_pairs_matrix(pool: KnowledgePool, lam: float = 1.0, *, edges_only: bool = False,
                     max_workers: int | None = None) -> np.ndarray:
    """Symmetric matrix of pairwise scores; diagonal is the self-score 1 + lam.

    Pairs are independent, so they may be computed on several threads;
    each cell is written exactly once and the result does not depend on
    the schedule.
    """
    if not pool.items:
        raise DeparaError("empty knowledge pool")
    k = len(pool.items)
    matrix = np.empty((k, k), dtype=np.float64)
    np.fill_diagonal(matrix, (0.0 if edges_only else 1.0) + lam)

    def score_pair(pair: tuple[int, int]) -> tuple[int, int, float]:
        i, j = pair
        cid_i, graph_i = pool.items[i]
        cid_j, graph_j = pool.items[j]
        try:
            report = graph_similarity(graph_i, graph_j, lam, edges_only=edges_only)
        except DeparaError as exc:
            raise DeparaError(f"pair ('{cid_i}', '{cid_j}'): {exc}") from exc
        return i, j, report.score

    pairs = list(combinations(range(k), 2))
    if max_workers is not None and max_workers > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool_exec:
            results = list(pool_exec.map(score_pair, pairs))
    else:
        results = [score_pair(pair) for pair in pairs]
    for i, j, value in results:
        matrix[i, j] = value
        matrix[j, i] = value
    return matrix


def matrix_to_csv(ids: Sequence[str], matrix: np.ndarray) -> str:
    """CSV view of a score matrix: candidate ids as headers, 9 significant digits."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([""] + list(ids))
    for cid, row in zip(ids, matrix):
        writer.writerow([cid] + [f"{value:.9g}" for value in row])
    return buf.getvalue()
