"""Knowledge-base persistence and cross-document merging.

A knowledge base is a directory holding a JSON manifest plus one JSONL file
per record kind (chunks, entities, hyperedges, edges, clusters), with
embeddings inline. Writes go through a temp directory and a rename so a
crashed build never leaves a half-written store. Loading validates every
cross-reference before returning.

Merging keeps per-document entity scoping: identically named entities from
different documents stay separate nodes and are only matched jointly by
name at query time.
"""
from __future__ import annotations

import hashlib
import json
import os
import shutil
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import PARAGRAPH_SEPARATOR, Chunk
from .errors import (
    DimensionMismatch,
    EmptyKnowledgeBase,
    IntegrityError,
    ParseError,
    VersionMismatch,
)
from .kbuild import DocKnowledge, Edge, EntityNode, Hyperedge, SemanticCluster, normalize_name
from .providers import EmbeddingVector

FORMAT_VERSION = 1

RECORD_FILES = ("chunks", "entities", "hyperedges", "edges", "clusters")


@dataclass
class KnowledgeBase:
    """Merged, read-only view over per-document knowledge."""

    manifest: dict
    chunks: dict[str, Chunk] = field(default_factory=dict)  # "{doc_id}:{index}"
    entities: dict[str, EntityNode] = field(default_factory=dict)
    hyperedges: dict[str, Hyperedge] = field(default_factory=dict)
    edges: dict[str, Edge] = field(default_factory=dict)
    clusters: dict[str, SemanticCluster] = field(default_factory=dict)

    name_index: dict[str, list[str]] = field(default_factory=dict)
    alias_index: dict[str, list[str]] = field(default_factory=dict)
    cluster_of_hyperedge: dict[str, str] = field(default_factory=dict)

    _hyperedge_vectors: tuple | None = field(default=None, repr=False)
    _edge_vectors: tuple | None = field(default=None, repr=False)

    @property
    def embedding_dimension(self) -> int:
        return int(self.manifest["embedding_dimension"])

    def build_indexes(self) -> None:
        self.name_index = {}
        self.alias_index = {}
        for eid in sorted(self.entities):
            entity = self.entities[eid]
            self.name_index.setdefault(entity.normalized, []).append(eid)
            for alias in entity.aliases:
                norm = normalize_name(alias)
                if norm:
                    self.alias_index.setdefault(norm, []).append(eid)
        self.cluster_of_hyperedge = {}
        for cid in sorted(self.clusters):
            for hid in self.clusters[cid].member_hyperedges:
                self.cluster_of_hyperedge[hid] = cid

    def hyperedge_matrix(self) -> tuple[list[str], np.ndarray]:
        if self._hyperedge_vectors is None:
            ids = sorted(self.hyperedges)
            rows = [self.hyperedges[i].embedding.values for i in ids]
            self._hyperedge_vectors = (ids, np.asarray(rows, dtype=np.float64))
        return self._hyperedge_vectors

    def edge_matrix(self) -> tuple[list[str], np.ndarray]:
        if self._edge_vectors is None:
            ids = sorted(self.edges)
            rows = [self.edges[i].embedding.values for i in ids]
            self._edge_vectors = (ids, np.asarray(rows, dtype=np.float64))
        return self._edge_vectors

    def chunk_key(self, doc_id: str, index: int) -> str:
        return f"{doc_id}:{index}"

    def window_text(self, hyperedge: Hyperedge) -> str:
        """Reassemble the extraction window a hyperedge's span points into."""
        parts = [
            self.chunks[self.chunk_key(hyperedge.doc_id, i)].text
            for i in range(hyperedge.window_start, hyperedge.chunk_index + 1)
        ]
        return PARAGRAPH_SEPARATOR.join(parts)


def config_hash(snapshot: dict) -> str:
    canonical = json.dumps(snapshot, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def _embedding_values(embedding: EmbeddingVector | None) -> list[float]:
    if embedding is None:
        raise IntegrityError("record is missing its embedding")
    return list(embedding.values)


def chunk_record(c: Chunk) -> dict:
    return {
        "doc_id": c.doc_id,
        "chunk_index": c.chunk_index,
        "text": c.text,
        "token_count": c.token_count,
        "char_start": c.char_start,
        "char_end": c.char_end,
    }


def entity_record(e: EntityNode) -> dict:
    return {
        "entity_id": e.entity_id,
        "doc_id": e.doc_id,
        "v_name": e.v_name,
        "v_text": e.v_text,
        "hyperdegree": e.hyperdegree,
        "aliases": list(e.aliases),
    }


def hyperedge_record(h: Hyperedge) -> dict:
    return {
        "hyperedge_id": h.hyperedge_id,
        "doc_id": h.doc_id,
        "h_text": h.h_text,
        "h_ref": h.h_ref,
        "incident_entities": list(h.incident_entities),
        "k_index": h.k_index,
        "chunk_index": h.chunk_index,
        "window_start": h.window_start,
        "ref_offset": h.ref_offset,
        "embedding": _embedding_values(h.embedding),
    }


def edge_record(e: Edge) -> dict:
    return {
        "edge_id": e.edge_id,
        "source_entity": e.source_entity,
        "target_entity": e.target_entity,
        "e_text": e.e_text,
        "provenance_span": e.provenance_span,
        "embedding": _embedding_values(e.embedding),
    }


def cluster_record(c: SemanticCluster) -> dict:
    return {
        "ch_id": c.ch_id,
        "doc_id": c.doc_id,
        "member_hyperedges": list(c.member_hyperedges),
        "ch_text": c.ch_text,
    }


def _chunk_from(record: dict) -> Chunk:
    return Chunk(
        doc_id=record["doc_id"],
        chunk_index=int(record["chunk_index"]),
        text=record["text"],
        token_count=int(record["token_count"]),
        char_start=int(record["char_start"]),
        char_end=int(record["char_end"]),
    )


def _entity_from(record: dict) -> EntityNode:
    return EntityNode(
        entity_id=record["entity_id"],
        doc_id=record.get("doc_id", ""),
        v_name=record["v_name"],
        v_text=record.get("v_text", ""),
        hyperdegree=int(record.get("hyperdegree", 0)),
        aliases=tuple(record.get("aliases", [])),
    )


def _hyperedge_from(record: dict) -> Hyperedge:
    return Hyperedge(
        hyperedge_id=record["hyperedge_id"],
        doc_id=record["doc_id"],
        h_text=record["h_text"],
        h_ref=record["h_ref"],
        incident_entities=tuple(record["incident_entities"]),
        k_index=int(record["k_index"]),
        chunk_index=int(record["chunk_index"]),
        window_start=int(record["window_start"]),
        ref_offset=int(record["ref_offset"]),
        embedding=EmbeddingVector(tuple(float(v) for v in record["embedding"])),
    )


def _edge_from(record: dict) -> Edge:
    return Edge(
        edge_id=record["edge_id"],
        source_entity=record["source_entity"],
        target_entity=record["target_entity"],
        e_text=record["e_text"],
        provenance_span=record.get("provenance_span", ""),
        embedding=EmbeddingVector(tuple(float(v) for v in record["embedding"])),
    )


def _cluster_from(record: dict) -> SemanticCluster:
    return SemanticCluster(
        ch_id=record["ch_id"],
        doc_id=record["doc_id"],
        member_hyperedges=tuple(record["member_hyperedges"]),
        ch_text=record["ch_text"],
    )


def merge_documents(
    doc_kbs: list[DocKnowledge], config_snapshot: dict | None = None
) -> KnowledgeBase:
    """Disjoint union of per-document structures into one knowledge base."""
    if not doc_kbs:
        raise EmptyKnowledgeBase("no documents to merge")
    dimensions: set[int] = set()
    for doc in doc_kbs:
        for h in doc.hyperedges:
            if h.embedding is not None:
                dimensions.add(h.embedding.dimension)
        for e in doc.edges:
            if e.embedding is not None:
                dimensions.add(e.embedding.dimension)
    if len(dimensions) > 1:
        raise DimensionMismatch(f"documents use mixed embedding dimensions {sorted(dimensions)}")

    snapshot = config_snapshot or {}
    kb = KnowledgeBase(
        manifest={
            "format_version": FORMAT_VERSION,
            "embedding_dimension": dimensions.pop() if dimensions else 0,
            "config": snapshot,
            "config_hash": config_hash(snapshot),
            "documents": {},
        }
    )
    for doc in doc_kbs:
        if doc.doc_id in kb.manifest["documents"]:
            raise IntegrityError(f"duplicate doc_id {doc.doc_id!r} in merge")
        for c in doc.chunks:
            kb.chunks[kb.chunk_key(doc.doc_id, c.chunk_index)] = c
        for e in doc.entities:
            kb.entities[e.entity_id] = e
        for h in doc.hyperedges:
            kb.hyperedges[h.hyperedge_id] = h
        for edge in doc.edges:
            kb.edges[edge.edge_id] = edge
        for cluster in doc.clusters:
            kb.clusters[cluster.ch_id] = cluster
        kb.manifest["documents"][doc.doc_id] = {
            "chunks": len(doc.chunks),
            "entities": len(doc.entities),
            "hyperedges": len(doc.hyperedges),
            "edges": len(doc.edges),
            "clusters": len(doc.clusters),
        }
    kb.build_indexes()
    validate_kb(kb)
    return kb


def validate_kb(kb: KnowledgeBase) -> None:
    """Referential and dimension checks; raises IntegrityError on the first hole."""
    dim = kb.manifest.get("embedding_dimension", 0)
    for hid, h in kb.hyperedges.items():
        if h.embedding is None or h.embedding.dimension != dim:
            raise IntegrityError(f"hyperedge {hid}: embedding dimension != {dim}")
        if len(h.incident_entities) < 2:
            raise IntegrityError(f"hyperedge {hid}: fewer than two incident entities")
        for eid in h.incident_entities:
            if eid not in kb.entities:
                raise IntegrityError(f"hyperedge {hid}: unknown entity {eid}")
        for index in (h.window_start, h.chunk_index):
            if kb.chunk_key(h.doc_id, index) not in kb.chunks:
                raise IntegrityError(f"hyperedge {hid}: missing chunk {h.doc_id}:{index}")
        window = kb.window_text(h)
        if h.ref_offset < 0 or window[h.ref_offset:h.ref_offset + len(h.h_ref)] != h.h_ref:
            raise IntegrityError(f"hyperedge {hid}: span does not match its window")
    for eid, e in kb.edges.items():
        if e.embedding is None or e.embedding.dimension != dim:
            raise IntegrityError(f"edge {eid}: embedding dimension != {dim}")
        if e.source_entity == e.target_entity:
            raise IntegrityError(f"edge {eid}: source equals target")
        for end in (e.source_entity, e.target_entity):
            if end not in kb.entities:
                raise IntegrityError(f"edge {eid}: unknown entity {end}")
    seen_members: set[str] = set()
    for cid, c in kb.clusters.items():
        for hid in c.member_hyperedges:
            if hid not in kb.hyperedges:
                raise IntegrityError(f"cluster {cid}: unknown hyperedge {hid}")
            if hid in seen_members:
                raise IntegrityError(f"cluster {cid}: hyperedge {hid} already clustered")
            seen_members.add(hid)


def save_kb(kb: KnowledgeBase, path: str | Path, force: bool = False) -> Path:
    """Write the knowledge base atomically (temp directory + rename).

    Refuses to overwrite a store with a different format version unless
    force is set.
    """
    target = Path(path)
    existing_manifest = target / "manifest.json"
    if existing_manifest.exists() and not force:
        try:
            version = json.loads(existing_manifest.read_text(encoding="utf-8")).get("format_version")
        except json.JSONDecodeError:
            version = None
        if version != FORMAT_VERSION:
            raise VersionMismatch(
                f"{target} holds format_version={version}; pass force to overwrite"
            )

    tmp = target.with_name(f"{target.name}.tmp-{os.getpid()}")
    if tmp.exists():
        shutil.rmtree(tmp)
    tmp.mkdir(parents=True)
    (tmp / "manifest.json").write_text(
        json.dumps(kb.manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    serializers = {
        "chunks": (kb.chunks, chunk_record),
        "entities": (kb.entities, entity_record),
        "hyperedges": (kb.hyperedges, hyperedge_record),
        "edges": (kb.edges, edge_record),
        "clusters": (kb.clusters, cluster_record),
    }
    for name in RECORD_FILES:
        records, serialize = serializers[name]
        with (tmp / f"{name}.jsonl").open("w", encoding="utf-8") as fh:
            for key in sorted(records):
                fh.write(json.dumps(serialize(records[key]), sort_keys=True) + "\n")
    if target.exists():
        shutil.rmtree(target)
    os.replace(tmp, target)
    return target


def _read_records(path: Path) -> list[dict]:
    records: list[dict] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(
                    f"{path.name}:{lineno}: {exc}", path=str(path), line=lineno
                ) from exc
            if not isinstance(record, dict):
                raise ParseError(
                    f"{path.name}:{lineno}: expected an object", path=str(path), line=lineno
                )
            records.append(record)
    return records


def load_kb(path: str | Path) -> KnowledgeBase:
    """Load and fully validate a knowledge base directory."""
    base = Path(path)
    manifest_path = base / "manifest.json"
    if not manifest_path.exists():
        raise EmptyKnowledgeBase(f"{base} contains no manifest.json")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"manifest.json: {exc}", path=str(manifest_path)) from exc
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"format_version={version}, expected {FORMAT_VERSION}")
    if not manifest.get("documents"):
        raise EmptyKnowledgeBase(f"{base} lists no documents")

    kb = KnowledgeBase(manifest=manifest)
    loaders = {
        "chunks": (_chunk_from, lambda c: kb.chunk_key(c.doc_id, c.chunk_index), kb.chunks),
        "entities": (_entity_from, lambda e: e.entity_id, kb.entities),
        "hyperedges": (_hyperedge_from, lambda h: h.hyperedge_id, kb.hyperedges),
        "edges": (_edge_from, lambda e: e.edge_id, kb.edges),
        "clusters": (_cluster_from, lambda c: c.ch_id, kb.clusters),
    }
    for name in RECORD_FILES:
        file_path = base / f"{name}.jsonl"
        if not file_path.exists():
            raise ParseError(f"missing record file {file_path.name}", path=str(file_path))
        parse, key_of, bucket = loaders[name]
        for lineno, record in enumerate(_read_records(file_path), start=1):
            try:
                value = parse(record)
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(
                    f"{file_path.name}:{lineno}: bad record: {exc}",
                    path=str(file_path),
                    line=lineno,
                ) from exc
            bucket[key_of(value)] = value
    kb.build_indexes()
    validate_kb(kb)
    return kb


def doc_knowledge_record(doc: DocKnowledge) -> dict:
    """Single-object serialization used by the per-document build cache."""
    return {
        "doc_id": doc.doc_id,
        "chunks": [chunk_record(c) for c in doc.chunks],
        "entities": [entity_record(e) for e in doc.entities],
        "hyperedges": [hyperedge_record(h) for h in doc.hyperedges],
        "edges": [edge_record(e) for e in doc.edges],
        "clusters": [cluster_record(c) for c in doc.clusters],
    }


def doc_knowledge_from_record(record: dict) -> DocKnowledge:
    return DocKnowledge(
        doc_id=record["doc_id"],
        chunks=[_chunk_from(r) for r in record["chunks"]],
        entities=[_entity_from(r) for r in record["entities"]],
        hyperedges=[_hyperedge_from(r) for r in record["hyperedges"]],
        edges=[_edge_from(r) for r in record["edges"]],
        clusters=[_cluster_from(r) for r in record["clusters"]],
    )
