from __future__ import annotations

import json
from pathlib import Path

import pytest

from hypergrain.config import PipelineConfig, ProviderSettings
from hypergrain.corpus import Document, PartitionConfig, normalize_text
from hypergrain.extraction import WindowConfig
from hypergrain.pipeline import build_document
from hypergrain.providers import MockProvider
from hypergrain.retrieval import RetrievalConfig
from hypergrain.ssc import SSCConfig
from hypergrain.store import merge_documents

DATA_DIR = Path(__file__).parent / "data"
ORACLE_DIR = Path(__file__).parent / "oracles"

SMALL_DOC = """\
Alice founded Acme in 2001. Acme acquired Beta Labs in 2010. Alice hired Bob at Acme.

Bob led the Gamma project at Acme. The Gamma project shipped Widget One in 2012. Carol joined Acme from Delta Corp.

Acme opened an office in Berlin. Alice met Carol in Berlin. Beta Labs developed the Widget One prototype.

Acme Solar builds solar panels in Arizona. Acme Solar builds solar inverters in Arizona. Acme Solar builds solar batteries in Arizona. Acme Solar builds solar trackers in Arizona.
"""


def small_config(**overrides) -> PipelineConfig:
    """Desk-scale settings: tiny chunks, permissive thresholds."""
    defaults = dict(
        partition=PartitionConfig(ct_min=10, ct_max=20),
        window=WindowConfig(g_max=3, g_overlap=2),
        tau_s=2,
        tau_e=2,
        ssc=SSCConfig(alpha=0.1, min_cluster_size=3, min_samples=2),
        retrieval=RetrievalConfig(tau_hyperedges=0.1, tau_edges=0.1),
        provider=ProviderSettings(kind="mock", mock_dimension=64),
    )
    defaults.update(overrides)
    return PipelineConfig(**defaults)


@pytest.fixture
def provider() -> MockProvider:
    return MockProvider(dimension=64)


@pytest.fixture
def small_document() -> Document:
    return Document(doc_id="d1", text=normalize_text(SMALL_DOC))


@pytest.fixture
def small_kb(provider, small_document):
    config = small_config()
    doc = build_document(small_document, config, provider)
    return merge_documents([doc], config.snapshot())


def load_oracle_cases() -> list[dict]:
    return json.loads((ORACLE_DIR / "hdbscan_cases.json").read_text(encoding="utf-8"))
