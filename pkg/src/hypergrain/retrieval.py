"""Query-time retrieval over the merged knowledge base.

Four operators (entity match, edge similarity, hyperedge similarity,
cluster membership) feed a mode-dependent evidence bundle that a single
generation call turns into an answer. Similarity scans are exhaustive and
exact; ranking ties break on ascending id so results are reproducible.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .corpus import TokenCounter, count_tokens
from .errors import ProviderUnavailable, ZeroVector
from .kbuild import Edge, EntityNode, Hyperedge, SemanticCluster, normalize_name
from .prompts import SYSTEM_PROMPT, load_template, render
from .providers import ChatRequest, GENERATION, Provider
from .extraction import parse_json_array
from .store import KnowledgeBase

log = logging.getLogger(__name__)

MODES = ("hypergraph", "graph", "hybrid")

# Retrieval components by name; ablation flags subtract from the mode's set.
COMPONENTS_BY_MODE = {
    "hypergraph": frozenset({"entities", "hyperedges", "clusters"}),
    "graph": frozenset({"entities", "edges"}),
    "hybrid": frozenset({"entities", "edges", "hyperedges", "clusters"}),
}


@dataclass(frozen=True)
class RetrievalConfig:
    n_hyperedges: int = 7
    n_edges: int = 3
    tau_hyperedges: float = 0.9
    tau_edges: float = 0.9
    mode: str = "hybrid"
    evidence_token_budget: int = 8000

    def __post_init__(self):
        if self.n_hyperedges < 0 or self.n_edges < 0:
            raise ValueError("result caps must be >= 0")
        for tau in (self.tau_hyperedges, self.tau_edges):
            if not -1.0 <= tau <= 1.0:
                raise ValueError(f"similarity thresholds must lie in [-1, 1], got {tau}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.evidence_token_budget < 1:
            raise ValueError("evidence_token_budget must be positive")


@dataclass(frozen=True)
class ScoredHyperedge:
    hyperedge: Hyperedge
    similarity: float


@dataclass(frozen=True)
class ScoredEdge:
    edge: Edge
    similarity: float


@dataclass(frozen=True)
class ScoredCluster:
    cluster: SemanticCluster
    best_similarity: float
    kept_members: int  # members whose spans survived budget truncation


@dataclass
class EvidenceBundle:
    """Mode-dependent evidence selection with span-level provenance."""

    mode: str
    entities: list[EntityNode] = field(default_factory=list)
    edges: list[ScoredEdge] = field(default_factory=list)
    hyperedges: list[ScoredHyperedge] = field(default_factory=list)
    clusters: list[ScoredCluster] = field(default_factory=list)
    cluster_texts: dict[str, str] = field(default_factory=dict)
    provenance: dict[str, list[str]] = field(default_factory=dict)

    def is_empty(self) -> bool:
        return not (self.entities or self.edges or self.hyperedges or self.clusters)

    def to_record(self) -> dict:
        return {
            "mode": self.mode,
            "entities": [
                {"entity_id": e.entity_id, "name": e.v_name, "summary": e.v_text}
                for e in self.entities
            ],
            "edges": [
                {"edge_id": s.edge.edge_id, "similarity": s.similarity, "text": s.edge.e_text}
                for s in self.edges
            ],
            "hyperedges": [
                {
                    "hyperedge_id": s.hyperedge.hyperedge_id,
                    "similarity": s.similarity,
                    "text": s.hyperedge.h_text,
                }
                for s in self.hyperedges
            ],
            "clusters": [
                {
                    "ch_id": s.cluster.ch_id,
                    "best_similarity": s.best_similarity,
                    "text": self.cluster_texts[s.cluster.ch_id],
                }
                for s in self.clusters
            ],
            "provenance": self.provenance,
        }


def extract_query_entities(
    query: str, provider: Provider, prompt_dir: str | None = None
) -> list[str]:
    """Entity names the provider finds in the query; empty on provider failure."""
    if not query.strip():
        raise ValueError("query must be non-empty")
    template = load_template("query_entities", prompt_dir)
    prompt = render(template, question=query)
    try:
        response = provider.chat(
            ChatRequest(system_prompt=SYSTEM_PROMPT, user_prompt=prompt), phase=GENERATION
        )
        names = parse_json_array(response)
    except ProviderUnavailable as exc:
        log.warning("query entity extraction unavailable, continuing without: %s", exc)
        return []
    except Exception as exc:
        log.warning("query entity extraction unparseable, continuing without: %s", exc)
        return []
    return [str(n).strip() for n in names if str(n).strip()]


def match_entities(names: list[str], kb: KnowledgeBase) -> list[EntityNode]:
    """Exact normalized-name matches, falling back to the alias table per name.

    A name present in several documents returns every node; results are
    deduplicated and ordered by entity id.
    """
    matched: dict[str, EntityNode] = {}
    for name in names:
        norm = normalize_name(name)
        if not norm:
            continue
        hits = kb.name_index.get(norm)
        if not hits:
            hits = kb.alias_index.get(norm, [])
        for eid in hits:
            matched[eid] = kb.entities[eid]
    return [matched[eid] for eid in sorted(matched)]


def _query_vector(query_embedding) -> np.ndarray:
    vec = np.asarray(
        query_embedding.values if hasattr(query_embedding, "values") else query_embedding,
        dtype=np.float64,
    )
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        raise ZeroVector("query embedding has zero norm")
    return vec / norm


def _similarity_scan(
    ids: list[str], matrix: np.ndarray, query_vec: np.ndarray, limit: int, tau: float
) -> list[tuple[str, float]]:
    if not ids or limit == 0:
        return []
    norms = np.linalg.norm(matrix, axis=1)
    if np.any(norms == 0.0):
        raise ZeroVector("stored embedding has zero norm")
    sims = (matrix @ query_vec) / norms
    qualifying = [(ids[i], float(sims[i])) for i in np.flatnonzero(sims > tau)]
    qualifying.sort(key=lambda pair: (-pair[1], pair[0]))
    return qualifying[:limit]


def retrieve_hyperedges(
    query_embedding, kb: KnowledgeBase, n_hyperedges: int, tau: float
) -> list[ScoredHyperedge]:
    """Top hyperedges by cosine similarity, strictly above tau.

    Returns every qualifying hyperedge when fewer than n_hyperedges clear
    the threshold.
    """
    ids, matrix = kb.hyperedge_matrix()
    query_vec = _query_vector(query_embedding)
    return [
        ScoredHyperedge(hyperedge=kb.hyperedges[hid], similarity=sim)
        for hid, sim in _similarity_scan(ids, matrix, query_vec, n_hyperedges, tau)
    ]


def retrieve_edges(
    query_embedding, kb: KnowledgeBase, n_edges: int, tau: float
) -> list[ScoredEdge]:
    """Same contract as retrieve_hyperedges, over the binary relation set."""
    ids, matrix = kb.edge_matrix()
    query_vec = _query_vector(query_embedding)
    return [
        ScoredEdge(edge=kb.edges[eid], similarity=sim)
        for eid, sim in _similarity_scan(ids, matrix, query_vec, n_edges, tau)
    ]


def retrieve_clusters(
    retrieved: list[ScoredHyperedge], kb: KnowledgeBase
) -> list[tuple[SemanticCluster, float]]:
    """Clusters containing at least one retrieved hyperedge.

    Each cluster appears once, ranked by its best member similarity, ties on
    cluster id.
    """
    best: dict[str, float] = {}
    for scored in retrieved:
        cid = kb.cluster_of_hyperedge.get(scored.hyperedge.hyperedge_id)
        if cid is None:
            continue  # noise hyperedges belong to no cluster
        if cid not in best or scored.similarity > best[cid]:
            best[cid] = scored.similarity
    ranked = sorted(best.items(), key=lambda pair: (-pair[1], pair[0]))
    return [(kb.clusters[cid], sim) for cid, sim in ranked]


def _truncate_to_budget(text: str, budget: int, tokenizer: TokenCounter) -> str:
    tokens = text.split()
    if tokenizer(text) <= budget:
        return text
    return " ".join(tokens[:budget])


def assemble_evidence(
    mode: str,
    entities: list[EntityNode],
    edges: list[ScoredEdge],
    hyperedges: list[ScoredHyperedge],
    clusters: list[tuple[SemanticCluster, float]],
    kb: KnowledgeBase,
    budget: int,
    components: frozenset[str] | None = None,
    tokenizer: TokenCounter = count_tokens,
) -> EvidenceBundle:
    """Combine retrieval results into a budgeted, mode-consistent bundle.

    Sections fill in fixed order (entities, edges, hyperedges, clusters) by
    rank; once the token budget runs short, cluster texts are truncated to
    the remaining room and any later items are dropped. Provenance keeps the
    spans backing every kept element, including the kept prefix of a
    truncated cluster.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    enabled = COMPONENTS_BY_MODE[mode] if components is None else components
    bundle = EvidenceBundle(mode=mode)
    remaining = budget

    if "entities" in enabled:
        for entity in entities:
            cost = tokenizer(entity.v_name) + tokenizer(entity.v_text)
            if cost > remaining:
                break
            bundle.entities.append(entity)
            bundle.provenance[entity.entity_id] = [entity.v_name]
            remaining -= cost
    if "edges" in enabled:
        for scored in edges:
            source = kb.entities[scored.edge.source_entity].v_name
            target = kb.entities[scored.edge.target_entity].v_name
            cost = tokenizer(f"{source} {scored.edge.e_text} {target}")
            if cost > remaining:
                break
            bundle.edges.append(scored)
            span = scored.edge.provenance_span
            bundle.provenance[scored.edge.edge_id] = [span] if span else []
            remaining -= cost
    if "hyperedges" in enabled:
        for scored in hyperedges:
            cost = tokenizer(scored.hyperedge.h_text)
            if cost > remaining:
                break
            bundle.hyperedges.append(scored)
            bundle.provenance[scored.hyperedge.hyperedge_id] = [scored.hyperedge.h_ref]
            remaining -= cost
    if "clusters" in enabled:
        for cluster, sim in clusters:
            if remaining < 16:
                break  # not enough room for a useful context block
            text = _truncate_to_budget(cluster.ch_text, remaining, tokenizer)
            kept_spans: list[str] = []
            for hid in cluster.member_hyperedges:
                ref = kb.hyperedges[hid].h_ref
                if ref in text and (not kept_spans or kept_spans[-1] != ref):
                    kept_spans.append(ref)
            bundle.clusters.append(
                ScoredCluster(cluster=cluster, best_similarity=sim, kept_members=len(kept_spans))
            )
            bundle.cluster_texts[cluster.ch_id] = text
            bundle.provenance[cluster.ch_id] = kept_spans
            remaining -= tokenizer(text)
    return bundle


def render_evidence(bundle: EvidenceBundle, kb: KnowledgeBase) -> str:
    """Plain-text rendering of the bundle for the generation prompt."""
    lines: list[str] = []
    lines.append("Entities:")
    for entity in bundle.entities:
        lines.append(f"- {entity.v_name} :: {entity.v_text}")
    lines.append("Relations:")
    for scored in bundle.edges:
        source = kb.entities[scored.edge.source_entity].v_name
        target = kb.entities[scored.edge.target_entity].v_name
        lines.append(f"- {source} {scored.edge.e_text} {target}")
    lines.append("Statements:")
    for scored in bundle.hyperedges:
        lines.append(f"- {scored.hyperedge.h_text}")
    lines.append("Context:")
    for scored in bundle.clusters:
        text = bundle.cluster_texts[scored.cluster.ch_id].replace("\n", " ")
        lines.append(f"- {text}")
    return "\n".join(lines)


def generate_answer(
    query: str,
    bundle: EvidenceBundle,
    kb: KnowledgeBase,
    provider: Provider,
    prompt_dir: str | None = None,
    temperature: float = 0.0,
) -> str:
    """One generation call conditioned on the rendered evidence."""
    template = load_template("answer", prompt_dir)
    evidence = render_evidence(bundle, kb)
    if bundle.is_empty():
        evidence = "(no evidence retrieved)"
    prompt = render(template, query=query, evidence=evidence)
    answer = provider.chat(
        ChatRequest(system_prompt=SYSTEM_PROMPT, user_prompt=prompt, temperature=temperature),
        phase=GENERATION,
    ).strip()
    if bundle.is_empty():
        answer = f"[no supporting evidence retrieved] {answer}"
    return answer


@dataclass
class QueryResult:
    query: str
    answer: str
    bundle: EvidenceBundle


def answer_query(
    kb: KnowledgeBase,
    query: str,
    provider: Provider,
    config: RetrievalConfig | None = None,
    disabled: frozenset[str] = frozenset(),
    prompt_dir: str | None = None,
    temperature: float = 0.0,
) -> QueryResult:
    """Full retrieval-and-generate path for one query.

    `disabled` names retrieval components to drop from the bundle
    ("entities", "edges", "hyperedges", "clusters"). Cluster retrieval still
    seeds from hyperedge similarity internally when only the hyperedge
    section is disabled.
    """
    config = config or RetrievalConfig()
    components = COMPONENTS_BY_MODE[config.mode] - disabled

    entities: list[EntityNode] = []
    if "entities" in components:
        names = extract_query_entities(query, provider, prompt_dir)
        entities = match_entities(names, kb)

    query_vec = provider.embed([query], phase=GENERATION)[0]

    hyperedge_hits: list[ScoredHyperedge] = []
    if "hyperedges" in components or "clusters" in components:
        hyperedge_hits = retrieve_hyperedges(
            query_vec, kb, config.n_hyperedges, config.tau_hyperedges
        )
    edge_hits: list[ScoredEdge] = []
    if "edges" in components:
        edge_hits = retrieve_edges(query_vec, kb, config.n_edges, config.tau_edges)
    cluster_hits: list[tuple[SemanticCluster, float]] = []
    if "clusters" in components:
        cluster_hits = retrieve_clusters(hyperedge_hits, kb)

    bundle = assemble_evidence(
        config.mode,
        entities,
        edge_hits,
        hyperedge_hits if "hyperedges" in components else [],
        cluster_hits,
        kb,
        config.evidence_token_budget,
        components=components,
    )
    try:
        answer = generate_answer(query, bundle, kb, provider, prompt_dir, temperature)
    except ProviderUnavailable as exc:
        exc.bundle = bundle  # keep the assembled evidence inspectable
        raise
    return QueryResult(query=query, answer=answer, bundle=bundle)
