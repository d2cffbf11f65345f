"""Structure-aware semantic clustering of hyperedges.

Pairwise dissimilarity combines cosine distance between hyperedge
embeddings with the separation of their extraction indices, weighted by
alpha. Density clustering over that matrix groups hyperedges into
document-grounded clusters whose reference text is the ordered join of the
members' source spans.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clustering import NOISE, cluster_labels
from .corpus import TokenCounter, count_tokens
from .errors import ZeroVector
from .kbuild import Hyperedge, SemanticCluster

CLUSTER_SPAN_SEPARATOR = "\n"


@dataclass(frozen=True)
class SSCConfig:
    alpha: float = 0.1
    min_cluster_size: int = 3
    min_samples: int = 2
    allow_single_cluster: bool = False
    normalize_positions: bool = False  # divide index separation by the item count
    ch_text_token_cap: int = 4000

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.min_cluster_size < 2:
            raise ValueError("min_cluster_size must be >= 2")
        if self.min_samples < 1:
            raise ValueError("min_samples must be >= 1")


def _vector(h: Hyperedge) -> np.ndarray:
    if h.embedding is None:
        raise ValueError(f"hyperedge {h.hyperedge_id} has no embedding")
    return np.asarray(h.embedding.values, dtype=np.float64)


def pair_distance(
    h_i: Hyperedge, h_j: Hyperedge, alpha: float, position_scale: float = 1.0
) -> float:
    """Cosine distance plus alpha times the extraction-index separation."""
    a, b = _vector(h_i), _vector(h_j)
    if a.shape != b.shape:
        raise ValueError("embedding dimensions differ")
    norm_a, norm_b = np.linalg.norm(a), np.linalg.norm(b)
    if norm_a == 0.0 or norm_b == 0.0:
        raise ZeroVector("cosine distance undefined for zero-norm embedding")
    cosine = float(np.dot(a, b) / (norm_a * norm_b))
    positional = abs(h_i.k_index - h_j.k_index) / position_scale
    return (1.0 - cosine) + alpha * positional


def distance_matrix(
    hyperedges: list[Hyperedge], alpha: float, normalize_positions: bool = False
) -> np.ndarray:
    """Symmetric pairwise matrix with an exact zero diagonal."""
    n = len(hyperedges)
    if n < 2:
        raise ValueError("distance matrix needs at least two hyperedges")
    vectors = np.vstack([_vector(h) for h in hyperedges])
    norms = np.linalg.norm(vectors, axis=1)
    if np.any(norms == 0.0):
        raise ZeroVector("cosine distance undefined for zero-norm embedding")
    unit = vectors / norms[:, None]
    cosine = np.clip(unit @ unit.T, -1.0, 1.0)
    indices = np.array([h.k_index for h in hyperedges], dtype=np.float64)
    positional = np.abs(indices[:, None] - indices[None, :])
    if normalize_positions:
        positional = positional / n
    matrix = (1.0 - cosine) + alpha * positional
    matrix = (matrix + matrix.T) / 2.0  # kill float asymmetry from the matmul
    np.clip(matrix, 0.0, None, out=matrix)
    np.fill_diagonal(matrix, 0.0)
    return matrix


def cluster_hyperedges(hyperedges: list[Hyperedge], config: SSCConfig) -> list[int]:
    """Density labels per hyperedge; NOISE (-1) marks unclustered ones.

    Too few hyperedges to reach min_cluster_size means everything is noise.
    """
    n = len(hyperedges)
    if n < max(2, config.min_cluster_size):
        return [NOISE] * n
    matrix = distance_matrix(hyperedges, config.alpha, config.normalize_positions)
    labels = cluster_labels(
        matrix,
        min_cluster_size=config.min_cluster_size,
        min_samples=config.min_samples,
        allow_single_cluster=config.allow_single_cluster,
    )
    return [int(l) for l in labels]


def build_clusters(
    doc_id: str,
    hyperedges: list[Hyperedge],
    labels: list[int],
    config: SSCConfig,
    tokenizer: TokenCounter = count_tokens,
) -> list[SemanticCluster]:
    """Materialize one cluster per non-noise label.

    Members are ordered by extraction index and the reference text is their
    source spans joined in that order, consecutive duplicates collapsed,
    capped at the configured token budget. Label groups smaller than
    min_cluster_size are rejected as inconsistent input.
    """
    if len(labels) != len(hyperedges):
        raise ValueError("labels are not aligned with hyperedges")
    groups: dict[int, list[Hyperedge]] = {}
    for h, label in zip(hyperedges, labels):
        if label != NOISE:
            groups.setdefault(label, []).append(h)
    for label, members in groups.items():
        if len(members) < config.min_cluster_size:
            raise ValueError(
                f"label {label} has {len(members)} members, below "
                f"min_cluster_size={config.min_cluster_size}"
            )

    ordered_groups = sorted(
        groups.values(), key=lambda members: min(h.k_index for h in members)
    )
    clusters: list[SemanticCluster] = []
    for i, members in enumerate(ordered_groups, start=1):
        members = sorted(members, key=lambda h: h.k_index)
        spans: list[str] = []
        for h in members:
            if not spans or spans[-1] != h.h_ref:
                spans.append(h.h_ref)
        text = CLUSTER_SPAN_SEPARATOR.join(spans)
        if tokenizer(text) > config.ch_text_token_cap:
            text = " ".join(text.split()[:config.ch_text_token_cap])
        clusters.append(
            SemanticCluster(
                ch_id=f"{doc_id}:c{i}",
                doc_id=doc_id,
                member_hyperedges=tuple(h.hyperedge_id for h in members),
                ch_text=text,
            )
        )
    return clusters
