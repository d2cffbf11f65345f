#!/usr/bin/env python3
"""Regenerate the density-clustering oracle fixtures.

Runs a reference HDBSCAN implementation (scikit-learn's, with a precomputed
metric) on constructed distance matrices and freezes the labels into
tests/oracles/hdbscan_cases.json. Requires scikit-learn, which is a tooling
dependency only; the shipped test suite reads the frozen file.

Usage: python scripts/make_hdbscan_oracles.py
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

try:
    from sklearn.cluster import HDBSCAN as ReferenceHDBSCAN
    from sklearn.metrics import pairwise_distances
except ImportError:
    sys.exit("scikit-learn is required to regenerate oracle fixtures")

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))
from hypergrain.clustering import cluster_labels  # noqa: E402

OUT = Path(__file__).resolve().parents[1] / "tests" / "oracles" / "hdbscan_cases.json"


def two_blobs() -> np.ndarray:
    # two tight groups of five: intra distance 0.1, inter distance 10
    d = np.full((10, 10), 10.0)
    for block in (slice(0, 5), slice(5, 10)):
        d[block, block] = 0.1
    np.fill_diagonal(d, 0.0)
    return d


def blob_plus_outlier() -> np.ndarray:
    # five mutually close points plus one point far from everything
    d = np.full((6, 6), 0.1)
    d[5, :] = 10.0
    d[:, 5] = 10.0
    np.fill_diagonal(d, 0.0)
    return d


def tiny_all_noise() -> np.ndarray:
    return np.array([[0.0, 1.0], [1.0, 0.0]])


def random_blobs(seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    points = np.vstack(
        [
            rng.normal(0.0, 0.3, (7, 2)),
            rng.normal(15.0, 0.4, (8, 2)),
            rng.uniform(-60.0, 60.0, (2, 2)),
        ]
    )
    return pairwise_distances(points)


def partition_key(labels):
    groups: dict[int, set[int]] = {}
    noise = frozenset(i for i, l in enumerate(labels) if l == -1)
    for i, l in enumerate(labels):
        if l != -1:
            groups.setdefault(int(l), set()).add(i)
    return noise, frozenset(frozenset(g) for g in groups.values())


def main() -> None:
    cases = [
        {
            "name": "two_separated_blobs",
            "matrix": two_blobs(),
            "min_cluster_size": 3,
            "min_samples": 2,
            "allow_single_cluster": False,
            "expected": {"clusters": 2, "noise": 0},
        },
        {
            "name": "blob_plus_outlier",
            "matrix": blob_plus_outlier(),
            "min_cluster_size": 3,
            "min_samples": 2,
            # excess-of-mass never selects the root cluster, so a dataset
            # whose only cluster is "almost everything" needs the
            # single-cluster variant to label the blob
            "allow_single_cluster": True,
            "expected": {"clusters": 1, "noise": 1},
        },
        {
            "name": "too_few_points",
            "matrix": tiny_all_noise(),
            "min_cluster_size": 3,
            "min_samples": 2,
            "allow_single_cluster": False,
            "expected": {"clusters": 0, "noise": 2},
        },
    ]
    for seed in range(4):
        cases.append(
            {
                "name": f"random_blobs_{seed}",
                "matrix": random_blobs(seed),
                "min_cluster_size": 3,
                "min_samples": 2,
                "allow_single_cluster": False,
                "expected": None,
            }
        )

    frozen = []
    for case in cases:
        matrix = case["matrix"]
        if case["name"] == "too_few_points":
            # the reference rejects n < min_cluster_size at validation; the
            # contract here is simply "everything is noise"
            reference = [-1] * matrix.shape[0]
        else:
            reference = ReferenceHDBSCAN(
                min_cluster_size=case["min_cluster_size"],
                min_samples=case["min_samples"],
                metric="precomputed",
                allow_single_cluster=case["allow_single_cluster"],
            ).fit_predict(matrix.copy()).tolist()
        ours = cluster_labels(
            matrix,
            min_cluster_size=case["min_cluster_size"],
            min_samples=case["min_samples"],
            allow_single_cluster=case["allow_single_cluster"],
        ).tolist()
        if partition_key(ours) != partition_key(reference):
            sys.exit(f"implementation disagrees with reference on {case['name']}: {ours} vs {reference}")
        frozen.append(
            {
                "name": case["name"],
                "matrix": [[float(v) for v in row] for row in matrix],
                "min_cluster_size": case["min_cluster_size"],
                "min_samples": case["min_samples"],
                "allow_single_cluster": case["allow_single_cluster"],
                "reference_labels": [int(v) for v in reference],
                "expected": case["expected"],
            }
        )

    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(frozen, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {len(frozen)} cases to {OUT}")


if __name__ == "__main__":
    main()
