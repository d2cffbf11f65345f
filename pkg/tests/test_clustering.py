from __future__ import annotations

import numpy as np
import pytest

from conftest import load_oracle_cases
from hypergrain.clustering import (
    HDBSCAN,
    NOISE,
    cluster_labels,
    condense_tree,
    core_distances,
    minimum_spanning_tree,
    mutual_reachability,
    single_linkage,
)


def partition_key(labels):
    """Noise set plus the set of cluster groups, invariant to label names."""
    groups: dict[int, set[int]] = {}
    noise = frozenset(i for i, l in enumerate(labels) if l == NOISE)
    for i, l in enumerate(labels):
        if l != NOISE:
            groups.setdefault(int(l), set()).add(i)
    return noise, frozenset(frozenset(g) for g in groups.values())


class TestAgainstOracles:
    @pytest.mark.parametrize("case", load_oracle_cases(), ids=lambda c: c["name"])
    def test_partition_matches_reference(self, case):
        labels = cluster_labels(
            np.array(case["matrix"]),
            min_cluster_size=case["min_cluster_size"],
            min_samples=case["min_samples"],
            allow_single_cluster=case["allow_single_cluster"],
        )
        assert partition_key(labels) == partition_key(case["reference_labels"])

    @pytest.mark.parametrize("case", load_oracle_cases(), ids=lambda c: c["name"])
    def test_expected_structure(self, case):
        if case["expected"] is None:
            return
        labels = cluster_labels(
            np.array(case["matrix"]),
            min_cluster_size=case["min_cluster_size"],
            min_samples=case["min_samples"],
            allow_single_cluster=case["allow_single_cluster"],
        )
        clusters = {int(l) for l in labels if l != NOISE}
        noise = sum(1 for l in labels if l == NOISE)
        assert len(clusters) == case["expected"]["clusters"]
        assert noise == case["expected"]["noise"]


class TestPipelineStages:
    def tight_pair_matrix(self):
        # 4 points: two tight pairs far apart
        d = np.array(
            [
                [0.0, 1.0, 9.0, 9.5],
                [1.0, 0.0, 9.2, 9.1],
                [9.0, 9.2, 0.0, 1.1],
                [9.5, 9.1, 1.1, 0.0],
            ]
        )
        return d

    def test_core_distances_count_self(self):
        d = self.tight_pair_matrix()
        # min_samples=2: second-smallest row value including the zero self
        assert core_distances(d, 2).tolist() == [1.0, 1.0, 1.1, 1.1]
        assert core_distances(d, 1).tolist() == [0.0, 0.0, 0.0, 0.0]

    def test_mutual_reachability_lower_bounded_by_core(self):
        d = self.tight_pair_matrix()
        mr = mutual_reachability(d, 3)
        core = core_distances(d, 3)
        for i in range(4):
            for j in range(4):
                if i != j:
                    assert mr[i, j] >= max(core[i], core[j])
                    assert mr[i, j] >= d[i, j]
        assert np.all(np.diag(mr) == 0.0)

    def test_mst_has_n_minus_1_edges_and_spans(self):
        d = self.tight_pair_matrix()
        edges = minimum_spanning_tree(mutual_reachability(d, 2))
        assert edges.shape == (3, 3)
        touched = set(edges[:, 0].astype(int)) | set(edges[:, 1].astype(int))
        assert touched == {0, 1, 2, 3}

    def test_single_linkage_shape(self):
        d = self.tight_pair_matrix()
        linkage = single_linkage(minimum_spanning_tree(mutual_reachability(d, 2)))
        assert linkage.shape == (3, 4)
        assert linkage[-1, 3] == 4  # final merge holds every point

    def test_condensed_tree_points_once(self):
        d = self.tight_pair_matrix()
        linkage = single_linkage(minimum_spanning_tree(mutual_reachability(d, 2)))
        condensed = condense_tree(linkage, min_cluster_size=2)
        points = [int(c) for c in condensed["child"] if c < 4]
        assert sorted(points) == [0, 1, 2, 3]


class TestEdgeCases:
    def test_too_few_points_all_noise(self):
        d = np.array([[0.0, 1.0], [1.0, 0.0]])
        assert cluster_labels(d, min_cluster_size=3).tolist() == [NOISE, NOISE]

    def test_single_point(self):
        assert cluster_labels(np.zeros((1, 1)), min_cluster_size=2).tolist() == [NOISE]

    def test_determinism(self):
        rng = np.random.default_rng(3)
        pts = np.vstack([rng.normal(0, 0.5, (8, 2)), rng.normal(10, 0.5, (8, 2))])
        d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
        first = cluster_labels(d, 3, 2)
        second = cluster_labels(d, 3, 2)
        assert first.tolist() == second.tolist()

    def test_validation_rejects_bad_matrices(self):
        with pytest.raises(ValueError, match="square"):
            cluster_labels(np.zeros((2, 3)))
        with pytest.raises(ValueError, match="symmetric"):
            cluster_labels(np.array([[0.0, 1.0], [2.0, 0.0]]), min_cluster_size=2)
        with pytest.raises(ValueError, match="negative"):
            cluster_labels(np.array([[0.0, -1.0], [-1.0, 0.0]]), min_cluster_size=2)
        with pytest.raises(ValueError, match="finite"):
            cluster_labels(np.array([[0.0, np.nan], [np.nan, 0.0]]), min_cluster_size=2)

    def test_min_cluster_size_validation(self):
        with pytest.raises(ValueError):
            cluster_labels(np.zeros((4, 4)), min_cluster_size=1)


class TestEstimatorApi:
    def test_fit_predict_and_labels(self):
        cases = load_oracle_cases()
        matrix = np.array(cases[0]["matrix"])
        est = HDBSCAN(min_cluster_size=3, min_samples=2)
        labels = est.fit_predict(matrix)
        assert labels.tolist() == est.labels_.tolist()

    def test_get_set_params(self):
        est = HDBSCAN()
        assert est.get_params() == {
            "min_cluster_size": 3,
            "min_samples": 2,
            "allow_single_cluster": False,
        }
        est.set_params(min_cluster_size=5)
        assert est.min_cluster_size == 5
        with pytest.raises(ValueError):
            est.set_params(bogus=1)
