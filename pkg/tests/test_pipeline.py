from __future__ import annotations

import pytest

from conftest import small_config
from hypergrain.corpus import Document
from hypergrain.pipeline import BuildFailure, build_corpus, build_document
from hypergrain.providers import MockProvider


def documents() -> list[Document]:
    return [
        Document(doc_id="one", text="Alice met Bob. Bob met Carol. Carol met Dan."),
        Document(doc_id="two", text="Erik met Fiona. Fiona met Grace."),
    ]


class TestBuildDocument:
    def test_structures_align(self, provider, small_document):
        doc = build_document(small_document, small_config(), provider)
        assert doc.chunks and doc.entities and doc.hyperedges
        entity_ids = {e.entity_id for e in doc.entities}
        for h in doc.hyperedges:
            assert set(h.incident_entities) <= entity_ids
        hyperedge_ids = {h.hyperedge_id for h in doc.hyperedges}
        for c in doc.clusters:
            assert set(c.member_hyperedges) <= hyperedge_ids
        assert all(e.v_text for e in doc.entities)  # summaries filled

    def test_ssc_disabled_yields_no_clusters(self, provider, small_document):
        doc = build_document(small_document, small_config(enable_ssc=False), provider)
        assert doc.clusters == []

    def test_no_sliding_window_still_builds(self, provider, small_document):
        doc = build_document(small_document, small_config(sliding_window=False), provider)
        assert doc.hyperedges


class TestBuildCorpus:
    def test_merge_order_follows_input(self, provider):
        kb, failures = build_corpus(documents(), small_config(), provider)
        assert not failures
        assert list(kb.manifest["documents"]) == ["one", "two"]

    def test_failed_document_reported_not_fatal(self, provider):
        docs = documents() + [Document(doc_id="empty", text="   ")]
        kb, failures = build_corpus(docs, small_config(), provider)
        assert set(failures) == {"empty"}
        assert set(kb.manifest["documents"]) == {"one", "two"}

    def test_all_failed_raises(self, provider):
        docs = [Document(doc_id="empty", text=" ")]
        with pytest.raises(BuildFailure):
            build_corpus(docs, small_config(), provider)

    def test_empty_corpus_raises(self, provider):
        with pytest.raises(BuildFailure):
            build_corpus([], small_config(), provider)

    def test_cache_resume_skips_provider_calls(self, tmp_path):
        config = small_config()
        cache_dir = tmp_path / "cache"
        first = MockProvider(dimension=64)
        kb1, _ = build_corpus(documents(), config, first, cache_dir=cache_dir)
        assert first.usage.totals().calls > 0
        second = MockProvider(dimension=64)
        kb2, _ = build_corpus(documents(), config, second, cache_dir=cache_dir)
        assert second.usage.totals().calls == 0  # everything from cache
        assert kb1.manifest == kb2.manifest
        assert kb1.hyperedges == kb2.hyperedges

    def test_cache_invalidated_by_config_change(self, tmp_path):
        cache_dir = tmp_path / "cache"
        build_corpus(documents(), small_config(), MockProvider(dimension=64), cache_dir=cache_dir)
        changed = small_config(tau_e=1)
        provider = MockProvider(dimension=64)
        build_corpus(documents(), changed, provider, cache_dir=cache_dir)
        assert provider.usage.totals().calls > 0  # config hash differs, rebuild

    def test_cache_invalidated_by_text_change(self, tmp_path):
        cache_dir = tmp_path / "cache"
        config = small_config()
        build_corpus(documents(), config, MockProvider(dimension=64), cache_dir=cache_dir)
        edited = [
            Document(doc_id="one", text="Alice met Bob. Bob met Hank."),
            documents()[1],
        ]
        provider = MockProvider(dimension=64)
        kb, _ = build_corpus(edited, config, provider, cache_dir=cache_dir)
        assert provider.usage.totals().calls > 0
        names = {e.v_name for e in kb.entities.values()}
        assert "Hank" in names

    def test_parallel_build_matches_serial(self):
        serial_kb, _ = build_corpus(documents(), small_config(), MockProvider(dimension=64))
        parallel_kb, _ = build_corpus(
            documents(), small_config(workers=3), MockProvider(dimension=64)
        )
        assert serial_kb.hyperedges == parallel_kb.hyperedges
        assert serial_kb.entities == parallel_kb.entities
        assert list(serial_kb.manifest["documents"]) == list(parallel_kb.manifest["documents"])
