"""Multi-granular retrieval-augmented generation over knowledge hypergraphs.

Builds a knowledge base holding entities, binary relations, n-ary relational
statements with verbatim source spans, and density-based clusters of those
statements; answers queries by combining entity, edge, hyperedge, and
cluster retrieval into one generation call.
"""

from .config import PipelineConfig, ProviderSettings, load_config, make_provider
from .corpus import (
    Chunk,
    Document,
    Paragraph,
    PartitionConfig,
    count_tokens,
    load_corpus_manifest,
    partition,
    partition_document,
    segment_paragraphs,
    split_long_paragraph,
)
from .clustering import HDBSCAN, NOISE, cluster_labels
from .evaluation import EvalReport, QAPair, exact_match, load_qa_dataset, run_eval, token_f1
from .extraction import KnowledgeExtractor, KnowledgeItem, WindowConfig, build_prefix, window_start
from .kbuild import (
    DocKnowledge,
    Edge,
    EntityNode,
    Hyperedge,
    SemanticCluster,
    build_graph,
    build_hypergraph,
    normalize_name,
    select_anchors,
    summarize_entities,
)
from .pipeline import build_corpus, build_document
from .providers import ChatRequest, EmbeddingVector, HttpProvider, MockProvider, Provider
from .retrieval import (
    EvidenceBundle,
    QueryResult,
    RetrievalConfig,
    answer_query,
    assemble_evidence,
    match_entities,
    retrieve_clusters,
    retrieve_edges,
    retrieve_hyperedges,
)
from .ssc import SSCConfig, build_clusters, cluster_hyperedges, distance_matrix, pair_distance
from .store import KnowledgeBase, load_kb, merge_documents, save_kb

__version__ = "0.1.0"

__all__ = [
    "PipelineConfig",
    "ProviderSettings",
    "load_config",
    "make_provider",
    "Chunk",
    "Document",
    "Paragraph",
    "PartitionConfig",
    "count_tokens",
    "load_corpus_manifest",
    "partition",
    "partition_document",
    "segment_paragraphs",
    "split_long_paragraph",
    "HDBSCAN",
    "NOISE",
    "cluster_labels",
    "EvalReport",
    "QAPair",
    "exact_match",
    "load_qa_dataset",
    "run_eval",
    "token_f1",
    "KnowledgeExtractor",
    "KnowledgeItem",
    "WindowConfig",
    "build_prefix",
    "window_start",
    "DocKnowledge",
    "Edge",
    "EntityNode",
    "Hyperedge",
    "SemanticCluster",
    "build_graph",
    "build_hypergraph",
    "normalize_name",
    "select_anchors",
    "summarize_entities",
    "build_corpus",
    "build_document",
    "ChatRequest",
    "EmbeddingVector",
    "HttpProvider",
    "MockProvider",
    "Provider",
    "EvidenceBundle",
    "QueryResult",
    "RetrievalConfig",
    "answer_query",
    "assemble_evidence",
    "match_entities",
    "retrieve_clusters",
    "retrieve_edges",
    "retrieve_hyperedges",
    "SSCConfig",
    "build_clusters",
    "cluster_hyperedges",
    "distance_matrix",
    "pair_distance",
    "KnowledgeBase",
    "load_kb",
    "merge_documents",
    "save_kb",
]
