"""Per-document knowledge structure construction.

From the ordered extraction items of one document this module builds the
entity set and hyperedge set, fills entity summaries once all hyperedges
exist, and derives a binary relation graph seeded from high-hyperdegree
anchor entities. Entities are scoped to their document; identically named
entities from different documents are only associated at retrieval time.
"""
from __future__ import annotations

import json
import logging
import re
import string
from dataclasses import dataclass, field

from .corpus import Chunk, TokenCounter, count_tokens
from .errors import ProviderUnavailable
from .extraction import KnowledgeItem, parse_json_array
from .prompts import SYSTEM_PROMPT, load_template, render
from .providers import ChatRequest, EmbeddingVector, Provider

log = logging.getLogger(__name__)

_PUNCT_EDGES = string.punctuation + "‘’“”"
_QUOTED = re.compile(r'"([^"]{1,80})"')
_PARENTHETICAL = re.compile(r"\(([^()]{1,80})\)")


def normalize_name(name: str) -> str:
    """Canonical key for entity matching.

    Casefolds, trims, collapses internal whitespace, and strips surrounding
    punctuation. Applied identically at build and query time.
    """
    stripped = name.strip().strip(_PUNCT_EDGES).strip()
    return " ".join(stripped.casefold().split())


def embedding_input(text: str, entity_names: list[str]) -> str:
    """Text embedded for a relational unit: statement plus incident names."""
    return f"{text}\n{', '.join(entity_names)}" if entity_names else text


@dataclass
class EntityNode:
    entity_id: str
    v_name: str
    v_text: str = ""
    hyperdegree: int = 0
    aliases: tuple[str, ...] = ()
    doc_id: str = ""

    @property
    def normalized(self) -> str:
        return normalize_name(self.v_name)


@dataclass
class Hyperedge:
    hyperedge_id: str
    doc_id: str
    h_text: str
    h_ref: str
    incident_entities: tuple[str, ...]  # entity ids, >= 2
    k_index: int
    chunk_index: int
    window_start: int
    ref_offset: int
    embedding: EmbeddingVector | None = None


@dataclass
class Edge:
    edge_id: str
    source_entity: str
    target_entity: str
    e_text: str
    provenance_span: str = ""
    embedding: EmbeddingVector | None = None


@dataclass
class SemanticCluster:
    ch_id: str
    doc_id: str
    member_hyperedges: tuple[str, ...]
    ch_text: str


@dataclass
class DocKnowledge:
    doc_id: str
    chunks: list[Chunk] = field(default_factory=list)
    entities: list[EntityNode] = field(default_factory=list)
    hyperedges: list[Hyperedge] = field(default_factory=list)
    edges: list[Edge] = field(default_factory=list)
    clusters: list[SemanticCluster] = field(default_factory=list)


def build_hypergraph(
    doc_id: str, items: list[KnowledgeItem], provider: Provider
) -> tuple[list[EntityNode], list[Hyperedge]]:
    """One hyperedge per extracted item, entities deduplicated by name.

    Entity summaries are left empty here; they are filled by
    summarize_entities after the document's hyperedge set is complete.
    Embeddings are computed in one batch call.
    """
    by_norm: dict[str, EntityNode] = {}
    alias_surfaces: dict[str, set[str]] = {}
    hyperedges: list[Hyperedge] = []

    for item in items:
        incident_ids: list[str] = []
        incident_names: list[str] = []
        for surface in item.k_entities:
            norm = normalize_name(surface)
            if not norm:
                continue
            node = by_norm.get(norm)
            if node is None:
                node = EntityNode(
                    entity_id=f"{doc_id}:e{len(by_norm) + 1}",
                    v_name=surface.strip(),
                    doc_id=doc_id,
                )
                by_norm[norm] = node
                alias_surfaces[norm] = set()
            elif surface.strip() != node.v_name:
                alias_surfaces[norm].add(surface.strip())
            if node.entity_id not in incident_ids:
                incident_ids.append(node.entity_id)
                incident_names.append(node.v_name)
        if len(incident_ids) < 2:
            log.warning(
                "dropping item %s: fewer than two distinct entities after normalization",
                item.item_id,
            )
            continue
        hyperedges.append(
            Hyperedge(
                hyperedge_id=f"{doc_id}:h{item.k_index}",
                doc_id=doc_id,
                h_text=item.k_text,
                h_ref=item.k_ref,
                incident_entities=tuple(incident_ids),
                k_index=item.k_index,
                chunk_index=item.chunk_index,
                window_start=item.window_start,
                ref_offset=item.ref_offset,
            )
        )

    entities = list(by_norm.values())
    degree: dict[str, int] = {e.entity_id: 0 for e in entities}
    for h in hyperedges:
        for eid in h.incident_entities:
            degree[eid] += 1
    names = {e.entity_id: e.v_name for e in entities}
    for e in entities:
        e.hyperdegree = degree[e.entity_id]
        e.aliases = tuple(sorted(alias_surfaces[e.normalized]))

    if hyperedges:
        texts = [
            embedding_input(h.h_text, [names[eid] for eid in h.incident_entities])
            for h in hyperedges
        ]
        vectors = provider.embed(texts)
        for h, vec in zip(hyperedges, vectors):
            h.embedding = vec
    return entities, hyperedges


def summarize_entity(
    entity: EntityNode,
    incident_texts: list[str],
    tau_s: int,
    provider: Provider,
    prompt_dir: str | None = None,
    token_cap: int = 2000,
    tokenizer: TokenCounter = count_tokens,
) -> str:
    """Summary text for one entity from its incident hyperedge texts.

    Above tau_s incident statements the provider synthesizes the summary;
    otherwise the texts are concatenated directly (capped from the tail).
    A provider failure falls back to concatenation.
    """
    if not incident_texts:
        raise ValueError(f"entity {entity.entity_id} has no incident hyperedges")

    def concatenated() -> str:
        joined = " ".join(incident_texts)
        tokens = joined.split()
        if tokenizer(joined) > token_cap:
            joined = " ".join(tokens[:token_cap])
        return joined

    if entity.hyperdegree <= tau_s:
        return concatenated()
    template = load_template("entity_summary", prompt_dir)
    prompt = render(
        template,
        entity=entity.v_name,
        statements="\n".join(f"- {t}" for t in incident_texts),
    )
    try:
        return provider.chat(ChatRequest(system_prompt=SYSTEM_PROMPT, user_prompt=prompt)).strip()
    except ProviderUnavailable as exc:
        log.warning("summary call failed for %s, concatenating instead: %s", entity.entity_id, exc)
        return concatenated()


def harvest_aliases(entity: EntityNode) -> tuple[str, ...]:
    """Extend aliases with short quoted or parenthetical variants from the summary."""
    found = set(entity.aliases)
    for pattern in (_QUOTED, _PARENTHETICAL):
        for match in pattern.finditer(entity.v_text):
            candidate = match.group(1).strip()
            norm = normalize_name(candidate)
            if norm and norm != entity.normalized and len(candidate.split()) <= 6:
                found.add(candidate)
    return tuple(sorted(found))


def summarize_entities(
    doc_id: str,
    entities: list[EntityNode],
    hyperedges: list[Hyperedge],
    tau_s: int,
    provider: Provider,
    prompt_dir: str | None = None,
    token_cap: int = 2000,
) -> None:
    """Fill v_text and aliases for every entity, in place.

    Must run only after the document's hyperedge set is complete, since the
    hyperdegree gate and the concatenation source both depend on it.
    """
    incident: dict[str, list[Hyperedge]] = {e.entity_id: [] for e in entities}
    for h in sorted(hyperedges, key=lambda h: h.k_index):
        for eid in h.incident_entities:
            incident[eid].append(h)
    for entity in entities:
        texts = [h.h_text for h in incident[entity.entity_id]]
        entity.v_text = summarize_entity(
            entity, texts, tau_s, provider, prompt_dir, token_cap
        )
        entity.aliases = harvest_aliases(entity)


def select_anchors(entities: list[EntityNode], tau_e: int) -> list[EntityNode]:
    """Entities whose hyperdegree strictly exceeds tau_e.

    Ordered by hyperdegree descending, then name, so anchor processing is
    deterministic.
    """
    anchors = [e for e in entities if e.hyperdegree > tau_e]
    return sorted(anchors, key=lambda e: (-e.hyperdegree, e.normalized))


def _cap_statements(
    statements: list[dict], token_cap: int, tokenizer: TokenCounter
) -> list[dict]:
    kept: list[dict] = []
    used = 0
    for s in statements:
        cost = tokenizer(s["statement"]) + tokenizer(s["span"])
        if kept and used + cost > token_cap:
            break
        kept.append(s)
        used += cost
    return kept


def extract_edges(
    anchor: EntityNode,
    incident_hyperedges: list[Hyperedge],
    neighbors: list[EntityNode],
    provider: Provider,
    prompt_dir: str | None = None,
    token_cap: int = 2000,
    tokenizer: TokenCounter = count_tokens,
) -> list[tuple[str, str, str, str]]:
    """Pairwise relations supported by the anchor's evidence spans.

    Returns (source_id, target_id, relation, evidence_span) tuples,
    deduplicated by endpoints and normalized relation text. Endpoints must
    resolve to the anchor or one of its neighbors; anything else in the
    response is discarded.
    """
    known: dict[str, EntityNode] = {anchor.normalized: anchor}
    for n in neighbors:
        known.setdefault(n.normalized, n)
    evidence = _cap_statements(
        [{"statement": h.h_text, "span": h.h_ref} for h in incident_hyperedges],
        token_cap,
        tokenizer,
    )
    template = load_template("pairwise_relations", prompt_dir)
    prompt = render(
        template,
        anchor=anchor.v_name,
        neighbors="\n".join(f"- {n.v_name}" for n in neighbors),
        evidence=json.dumps(evidence, ensure_ascii=False),
    )
    try:
        records = parse_json_array(
            provider.chat(ChatRequest(system_prompt=SYSTEM_PROMPT, user_prompt=prompt))
        )
    except Exception as exc:  # parse or provider failure skips this anchor
        log.warning("edge extraction failed for anchor %s: %s", anchor.entity_id, exc)
        return []

    out: list[tuple[str, str, str, str]] = []
    seen: set[tuple[str, str, str]] = set()
    for record in records:
        if not isinstance(record, dict):
            continue
        source = known.get(normalize_name(str(record.get("source", ""))))
        target = known.get(normalize_name(str(record.get("target", ""))))
        relation = str(record.get("relation", "")).strip()
        span = str(record.get("evidence_span", "")).strip()
        if source is None or target is None or not relation:
            continue
        if source.entity_id == target.entity_id:
            continue
        key = (source.entity_id, target.entity_id, normalize_name(relation))
        if key in seen:
            continue
        seen.add(key)
        out.append((source.entity_id, target.entity_id, relation, span))
    return out


def build_graph(
    doc_id: str,
    entities: list[EntityNode],
    hyperedges: list[Hyperedge],
    tau_e: int,
    provider: Provider,
    prompt_dir: str | None = None,
    token_cap: int = 2000,
) -> list[Edge]:
    """Derive the binary relation set from anchor entities.

    Composes select_anchors and extract_edges, deduplicates across anchors,
    and computes edge embeddings in one batch.
    """
    by_id = {e.entity_id: e for e in entities}
    incident: dict[str, list[Hyperedge]] = {e.entity_id: [] for e in entities}
    for h in sorted(hyperedges, key=lambda h: h.k_index):
        for eid in h.incident_entities:
            incident[eid].append(h)

    raw: list[tuple[str, str, str, str]] = []
    seen: set[tuple[str, str, str]] = set()
    for anchor in select_anchors(entities, tau_e):
        incident_h = incident[anchor.entity_id]
        neighbor_ids: list[str] = []
        for h in incident_h:
            for eid in h.incident_entities:
                if eid != anchor.entity_id and eid not in neighbor_ids:
                    neighbor_ids.append(eid)
        neighbors = [by_id[eid] for eid in neighbor_ids]
        for source, target, relation, span in extract_edges(
            anchor, incident_h, neighbors, provider, prompt_dir, token_cap
        ):
            key = (source, target, normalize_name(relation))
            if key not in seen:
                seen.add(key)
                raw.append((source, target, relation, span))

    edges = [
        Edge(
            edge_id=f"{doc_id}:r{i}",
            source_entity=source,
            target_entity=target,
            e_text=relation,
            provenance_span=span,
        )
        for i, (source, target, relation, span) in enumerate(raw, start=1)
    ]
    if edges:
        texts = [
            embedding_input(
                e.e_text, [by_id[e.source_entity].v_name, by_id[e.target_entity].v_name]
            )
            for e in edges
        ]
        vectors = provider.embed(texts)
        for e, vec in zip(edges, vectors):
            e.embedding = vec
    return edges
