#!/usr/bin/env python3
"""Regenerate the golden manifest and evaluation report for the mock corpus.

Only needed when the corpus fixtures, the mock provider rules, or the
pipeline's deterministic behaviour intentionally change. Review every diff
this produces: the goldens pin end-to-end determinism.

Usage: python scripts/make_goldens.py
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from hypergrain.config import load_config, make_provider  # noqa: E402
from hypergrain.corpus import load_corpus_manifest  # noqa: E402
from hypergrain.evaluation import load_qa_dataset, run_eval  # noqa: E402
from hypergrain.pipeline import build_corpus  # noqa: E402

DATA = ROOT / "tests" / "data"


def main() -> None:
    config = load_config(DATA / "config.yaml")
    provider = make_provider(config.provider)
    documents = load_corpus_manifest(DATA / "corpus" / "manifest.jsonl")
    kb, failures = build_corpus(documents, config, provider)
    if failures:
        sys.exit(f"corpus build failed: {failures}")

    golden_manifest = {
        "embedding_dimension": kb.manifest["embedding_dimension"],
        "config_hash": kb.manifest["config_hash"],
        "documents": kb.manifest["documents"],
        "totals": {
            "chunks": len(kb.chunks),
            "entities": len(kb.entities),
            "hyperedges": len(kb.hyperedges),
            "edges": len(kb.edges),
            "clusters": len(kb.clusters),
        },
    }
    (DATA / "golden_manifest.json").write_text(
        json.dumps(golden_manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    dataset, errors = load_qa_dataset(DATA / "dataset.jsonl")
    if errors:
        sys.exit(f"dataset has bad lines: {errors}")
    eval_provider = make_provider(config.provider)  # fresh usage counters
    report = run_eval(dataset, kb, eval_provider, config.retrieval)
    golden_report = {
        "em_mean": report.em_mean,
        "f1_mean": round(report.f1_mean, 10),
        "items": [
            {
                "question": item.question,
                "prediction": item.prediction,
                "em": item.em,
                "f1": round(item.f1, 10),
            }
            for item in report.items
        ],
    }
    (DATA / "golden_report.json").write_text(
        json.dumps(golden_report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"golden manifest: {golden_manifest['totals']}")
    print(f"golden report: EM={report.em_mean} F1={report.f1_mean:.4f}")


if __name__ == "__main__":
    main()
