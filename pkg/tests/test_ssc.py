from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypergrain.clustering import NOISE
from hypergrain.errors import ZeroVector
from hypergrain.kbuild import Hyperedge
from hypergrain.providers import EmbeddingVector
from hypergrain.ssc import (
    SSCConfig,
    build_clusters,
    cluster_hyperedges,
    distance_matrix,
    pair_distance,
)


def edge(index: int, values: tuple[float, ...], text: str = "", ref: str = "") -> Hyperedge:
    return Hyperedge(
        hyperedge_id=f"d:h{index}",
        doc_id="d",
        h_text=text or f"statement {index}",
        h_ref=ref or f"span {index}",
        incident_entities=("d:e1", "d:e2"),
        k_index=index,
        chunk_index=1,
        window_start=1,
        ref_offset=0,
        embedding=EmbeddingVector(values),
    )


class TestPairDistance:
    def test_self_distance_zero(self):
        a = edge(3, (0.6, 0.8))
        assert pair_distance(a, a, alpha=0.1) == pytest.approx(0.0, abs=1e-12)

    def test_orthogonal_with_positional(self):
        a = edge(1, (1.0, 0.0))
        b = edge(6, (0.0, 1.0))
        assert pair_distance(a, b, alpha=0.1) == pytest.approx(1.5, abs=1e-9)

    def test_identical_embeddings_pure_positional(self):
        a = edge(1, (0.6, 0.8))
        b = edge(11, (0.6, 0.8))
        assert pair_distance(a, b, alpha=0.1) == pytest.approx(1.0, abs=1e-9)

    def test_zero_vector_raises(self):
        with pytest.raises(ZeroVector):
            pair_distance(edge(1, (0.0, 0.0)), edge(2, (1.0, 0.0)), alpha=0.1)

    def test_alpha_zero_is_pure_cosine(self):
        a = edge(1, (1.0, 0.0))
        b = edge(100, (0.0, 1.0))
        assert pair_distance(a, b, alpha=0.0) == pytest.approx(1.0, abs=1e-12)

    @given(
        st.lists(st.floats(-1, 1), min_size=4, max_size=4),
        st.lists(st.floats(-1, 1), min_size=4, max_size=4),
        st.integers(1, 500),
        st.integers(1, 500),
        st.floats(0, 1),
    )
    @settings(max_examples=300, deadline=None)
    def test_symmetry_and_nonnegativity(self, u, v, i, j, alpha):
        norm_u = float(np.linalg.norm(u))
        norm_v = float(np.linalg.norm(v))
        if norm_u < 1e-9 or norm_v < 1e-9:
            return
        a = edge(i, tuple(u))
        b = edge(j, tuple(v))
        d_ab = pair_distance(a, b, alpha)
        d_ba = pair_distance(b, a, alpha)
        assert d_ab == pytest.approx(d_ba, abs=1e-9)
        assert d_ab >= -1e-12


class TestDistanceMatrix:
    def test_two_points_symmetric(self):
        m = distance_matrix([edge(1, (1.0, 0.0)), edge(2, (0.0, 1.0))], alpha=0.1)
        assert m.shape == (2, 2)
        assert m[0, 1] == m[1, 0]
        assert m[0, 0] == m[1, 1] == 0.0

    def test_duplicate_hyperedge_zero_pair(self):
        edges = [edge(1, (1.0, 0.0)), edge(1, (1.0, 0.0)), edge(5, (0.0, 1.0))]
        m = distance_matrix(edges, alpha=0.1)
        assert m[0, 1] == pytest.approx(0.0, abs=1e-12)

    def test_matches_pair_distance(self):
        rng = np.random.default_rng(0)
        edges = [edge(i + 1, tuple(rng.normal(size=5))) for i in range(6)]
        m = distance_matrix(edges, alpha=0.3)
        for i in range(6):
            for j in range(6):
                expected = 0.0 if i == j else pair_distance(edges[i], edges[j], 0.3)
                assert m[i, j] == pytest.approx(expected, abs=1e-9)

    def test_requires_two(self):
        with pytest.raises(ValueError):
            distance_matrix([edge(1, (1.0, 0.0))], alpha=0.1)

    def test_zero_vector_raises(self):
        with pytest.raises(ZeroVector):
            distance_matrix([edge(1, (0.0, 0.0)), edge(2, (1.0, 0.0))], alpha=0.1)

    def test_normalized_positions_flag(self):
        edges = [edge(1, (1.0, 0.0)), edge(9, (1.0, 0.0))]
        raw = distance_matrix(edges, alpha=1.0, normalize_positions=False)
        scaled = distance_matrix(edges, alpha=1.0, normalize_positions=True)
        assert raw[0, 1] == pytest.approx(8.0, abs=1e-9)
        assert scaled[0, 1] == pytest.approx(4.0, abs=1e-9)  # divided by n=2


class TestClusterHyperedges:
    def config(self, **kw):
        defaults = dict(alpha=0.1, min_cluster_size=3, min_samples=2)
        defaults.update(kw)
        return SSCConfig(**defaults)

    def test_identical_embeddings_positional_structure(self):
        # same embedding everywhere: only extraction-order separation drives
        # the clustering, so the two index bands become the two clusters
        vec = (0.6, 0.8)
        edges = [edge(i, vec) for i in [1, 2, 3, 4, 5]] + [edge(i, vec) for i in [101, 102, 103, 104, 105]]
        labels = cluster_hyperedges(edges, self.config())
        assert len(set(labels[:5])) == 1
        assert len(set(labels[5:])) == 1
        assert labels[0] != labels[5]
        assert NOISE not in labels

    def test_too_few_all_noise(self):
        edges = [edge(1, (1.0, 0.0)), edge(2, (0.0, 1.0))]
        assert cluster_hyperedges(edges, self.config()) == [NOISE, NOISE]

    def test_partition_property_fuzz(self):
        rng = np.random.default_rng(12)
        for _ in range(15):
            n = int(rng.integers(2, 30))
            edges = [
                edge(i + 1, tuple(rng.normal(size=8)))
                for i in range(n)
            ]
            labels = cluster_hyperedges(edges, self.config())
            assert len(labels) == n
            clusters = build_clusters("d", edges, labels, self.config())
            assigned = [h for c in clusters for h in c.member_hyperedges]
            assert len(assigned) == len(set(assigned))  # nothing in two clusters
            noise_count = sum(1 for l in labels if l == NOISE)
            assert len(assigned) + noise_count == n


class TestBuildClusters:
    def config(self, **kw):
        defaults = dict(alpha=0.1, min_cluster_size=2, min_samples=1)
        defaults.update(kw)
        return SSCConfig(**defaults)

    def test_undersized_label_group_rejected(self):
        edges = [edge(1, (1.0, 0.0)), edge(2, (1.0, 0.0)), edge(3, (1.0, 0.0)), edge(4, (1.0, 0.0))]
        with pytest.raises(ValueError, match="below"):
            build_clusters("d", edges, [0, 0, 1, NOISE], self.config(min_cluster_size=3))

    def test_all_noise_no_clusters(self):
        edges = [edge(1, (1.0, 0.0)), edge(2, (1.0, 0.0))]
        assert build_clusters("d", edges, [NOISE, NOISE], self.config()) == []

    def test_ch_text_ordered_by_k_index(self):
        edges = [
            edge(5, (1.0, 0.0), ref="later span"),
            edge(2, (1.0, 0.0), ref="early span"),
        ]
        (cluster,) = build_clusters("d", edges, [0, 0], self.config())
        assert cluster.ch_text == "early span\nlater span"
        assert cluster.member_hyperedges == ("d:h2", "d:h5")

    def test_consecutive_duplicate_spans_collapsed(self):
        edges = [
            edge(1, (1.0, 0.0), ref="same span"),
            edge(2, (1.0, 0.0), ref="same span"),
            edge(3, (1.0, 0.0), ref="other span"),
        ]
        (cluster,) = build_clusters("d", edges, [0, 0, 0], self.config())
        assert cluster.ch_text == "same span\nother span"

    def test_token_cap_truncates(self):
        edges = [
            edge(1, (1.0, 0.0), ref="one two three four"),
            edge(2, (1.0, 0.0), ref="five six seven eight"),
        ]
        (cluster,) = build_clusters(
            "d", edges, [0, 0], self.config(ch_text_token_cap=5)
        )
        assert cluster.ch_text.split() == ["one", "two", "three", "four", "five"]

    def test_cluster_ids_stable_and_ordered(self):
        edges = [
            edge(10, (1.0, 0.0)), edge(11, (1.0, 0.0)),
            edge(1, (0.0, 1.0)), edge(2, (0.0, 1.0)),
        ]
        clusters = build_clusters("d", edges, [1, 1, 0, 0], self.config())
        assert [c.ch_id for c in clusters] == ["d:c1", "d:c2"]
        assert clusters[0].member_hyperedges == ("d:h1", "d:h2")

    def test_misaligned_labels_rejected(self):
        with pytest.raises(ValueError, match="aligned"):
            build_clusters("d", [edge(1, (1.0, 0.0))], [0, 0], self.config())


class TestConfigValidation:
    def test_bad_values(self):
        with pytest.raises(ValueError):
            SSCConfig(alpha=-0.1)
        with pytest.raises(ValueError):
            SSCConfig(min_cluster_size=1)
        with pytest.raises(ValueError):
            SSCConfig(min_samples=0)
