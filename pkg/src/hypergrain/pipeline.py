"""Offline build orchestration: documents in, knowledge base out.

Each document runs the full construction chain independently (partition,
windowed extraction, hypergraph, deferred summaries, anchor graph, semantic
clusters), so documents can build in parallel and a failed document never
poisons the rest. Completed documents are cached on disk keyed by the
configuration and document text, which makes interrupted builds resumable.
"""
from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .config import PipelineConfig
from .corpus import Document, partition_document
from .errors import HypergrainError
from .extraction import KnowledgeExtractor, PrefixCache
from .kbuild import DocKnowledge, build_graph, build_hypergraph, summarize_entities
from .providers import Provider
from .ssc import build_clusters, cluster_hyperedges
from .store import (
    KnowledgeBase,
    config_hash,
    doc_knowledge_from_record,
    doc_knowledge_record,
    merge_documents,
)

log = logging.getLogger(__name__)


class BuildFailure(HypergrainError):
    """Raised when every document in a build fails."""


def build_document(
    document: Document, config: PipelineConfig, provider: Provider
) -> DocKnowledge:
    """Run the full construction chain for one document."""
    chunks = partition_document(document, config.partition)
    extractor = KnowledgeExtractor(
        provider,
        config.effective_window,
        prompt_dir=config.prompt_dir,
        cache=PrefixCache(),
    )
    items = extractor.extract_document(chunks)
    entities, hyperedges = build_hypergraph(document.doc_id, items, provider)
    summarize_entities(
        document.doc_id,
        entities,
        hyperedges,
        config.tau_s,
        provider,
        prompt_dir=config.prompt_dir,
        token_cap=config.summary_token_cap,
    )
    edges = build_graph(
        document.doc_id,
        entities,
        hyperedges,
        config.tau_e,
        provider,
        prompt_dir=config.prompt_dir,
        token_cap=config.edge_prompt_token_cap,
    )
    clusters = []
    if config.enable_ssc:
        labels = cluster_hyperedges(hyperedges, config.ssc)
        clusters = build_clusters(document.doc_id, hyperedges, labels, config.ssc)
    return DocKnowledge(
        doc_id=document.doc_id,
        chunks=chunks,
        entities=entities,
        hyperedges=hyperedges,
        edges=edges,
        clusters=clusters,
    )


def _cache_path(cache_dir: Path, doc_id: str) -> Path:
    digest = hashlib.sha256(doc_id.encode()).hexdigest()[:16]
    return cache_dir / f"{digest}.json"


def _text_hash(document: Document) -> str:
    return hashlib.sha256(document.text.encode()).hexdigest()[:16]


def _load_cached(
    cache_dir: Path, document: Document, build_hash: str
) -> DocKnowledge | None:
    path = _cache_path(cache_dir, document.doc_id)
    if not path.exists():
        return None
    try:
        record = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError:
        return None
    if record.get("config_hash") != build_hash or record.get("text_hash") != _text_hash(document):
        return None
    if record.get("doc_id") != document.doc_id:
        return None
    try:
        return doc_knowledge_from_record(record["doc"])
    except (KeyError, TypeError, ValueError):
        return None


def _write_cache(
    cache_dir: Path, document: Document, build_hash: str, doc: DocKnowledge
) -> None:
    cache_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "doc_id": document.doc_id,
        "config_hash": build_hash,
        "text_hash": _text_hash(document),
        "doc": doc_knowledge_record(doc),
    }
    _cache_path(cache_dir, document.doc_id).write_text(
        json.dumps(payload, sort_keys=True), encoding="utf-8"
    )


def build_corpus(
    documents: list[Document],
    config: PipelineConfig,
    provider: Provider,
    cache_dir: str | Path | None = None,
    resume: bool = True,
) -> tuple[KnowledgeBase, dict[str, str]]:
    """Build every document and merge the results.

    Returns the merged knowledge base plus a map of failed doc_ids to error
    messages. Raises BuildFailure only when no document succeeds. Merge
    order follows the input order regardless of completion order.
    """
    if not documents:
        raise BuildFailure("no documents to build")
    snapshot = config.snapshot()
    build_hash = config_hash(snapshot)
    cache = Path(cache_dir) if cache_dir is not None else None

    def run(document: Document) -> DocKnowledge | Exception:
        try:
            if cache is not None and resume:
                cached = _load_cached(cache, document, build_hash)
                if cached is not None:
                    log.info("document %s served from build cache", document.doc_id)
                    return cached
            doc = build_document(document, config, provider)
            if cache is not None:
                _write_cache(cache, document, build_hash, doc)
            return doc
        except Exception as exc:  # isolate per-document failures
            log.warning("document %s failed: %s", document.doc_id, exc)
            return exc

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(run, documents))
    else:
        results = [run(d) for d in documents]

    built: list[DocKnowledge] = []
    failures: dict[str, str] = {}
    for document, result in zip(documents, results):
        if isinstance(result, Exception):
            failures[document.doc_id] = str(result)
        else:
            built.append(result)
    if not built:
        raise BuildFailure(f"all {len(documents)} documents failed; first: {next(iter(failures.values()))}")
    return merge_documents(built, snapshot), failures
