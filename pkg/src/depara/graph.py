"""Attribution graphs over a probe set.

Nodes are the vectorized attribution maps of the probe points; edges are
the pairwise cosine similarities of their embeddings. The graph is fully
connected and undirected, so only the upper triangle is stored, ordered
lexicographically by (p, q) with p < q.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bundles import ProbeBundle
from .errors import DeparaError


@dataclass(frozen=True, eq=False)
class DeparaGraph:
    model_id: str
    layer_id: str
    probe_id: str
    nodes: np.ndarray  # n x d_input float32, one row per probe point
    edges: np.ndarray  # n(n-1)/2 float64 cosine values in [-1, 1]

    @property
    def n(self) -> int:
        return self.nodes.shape[0]

    @property
    def d_input(self) -> int:
        return self.nodes.shape[1]

    @property
    def label(self) -> str:
        return f"{self.model_id}:{self.layer_id}"

    def comparable_with(self, other: "DeparaGraph") -> bool:
        return self.probe_id == other.probe_id and self.n == other.n

    def to_dict(self, include_nodes: bool = False) -> dict:
        """Debug-oriented JSON view; not a stability-guaranteed format."""
        out = {
            "model_id": self.model_id,
            "layer_id": self.layer_id,
            "probe_id": self.probe_id,
            "n": self.n,
            "d_input": self.d_input,
            "edges": [float(e) for e in self.edges],
        }
        if include_nodes:
            out["nodes"] = [[float(v) for v in row] for row in self.nodes]
        return out


def edge_index(p: int, q: int, n: int) -> int:
    """Flat index of edge (p, q) in the lexicographic upper triangle of n nodes."""
    if not 0 <= p < q < n:
        raise DeparaError(f"invalid edge pair ({p}, {q}) for n={n}: need 0 <= p < q < n")
    return p * (2 * n - p - 1) // 2 + (q - p - 1)


def build_graph(bundle: ProbeBundle) -> DeparaGraph:
    """Construct the attribution graph of a bundle.

    Edges are computed in float64 and clamped to [-1, 1]. A zero
    embedding row is rejected: its cosine similarity is undefined.
    """
    emb = bundle.embeddings.astype(np.float64)
    norms = np.sqrt(np.einsum("ij,ij->i", emb, emb))
    zero_rows = np.flatnonzero(norms == 0.0)
    if zero_rows.size:
        raise DeparaError(
            f"zero embedding vector at probe index {int(zero_rows[0])}: cosine similarity undefined"
        )
    unit = emb / norms[:, None]
    sims = unit @ unit.T
    iu, ju = np.triu_indices(bundle.n, k=1)
    edges = np.clip(sims[iu, ju], -1.0, 1.0)
    edges.flags.writeable = False
    return DeparaGraph(
        model_id=bundle.model_id,
        layer_id=bundle.layer_id,
        probe_id=bundle.probe_id,
        nodes=bundle.attributions,
        edges=edges,
    )
