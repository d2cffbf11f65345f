"""Hierarchical density-based clustering over a precomputed distance matrix.

Implements the full HDBSCAN pipeline: core distances from the
min_samples-th neighbour (the point itself counts), mutual-reachability
transform, a minimum spanning tree via Prim's algorithm, single-linkage
hierarchy, condensation at min_cluster_size, and excess-of-mass cluster
selection. Points that never join a stable cluster are labelled NOISE.

All tie-breaking is pinned: Prim expansion and equal-weight edge ordering
both favour the lowest point index, so identical matrices always produce
identical labels.
"""
from __future__ import annotations

import numpy as np

NOISE = -1


def _validate_matrix(distance_matrix: np.ndarray) -> np.ndarray:
    matrix = np.asarray(distance_matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"distance matrix must be square, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise ValueError("distance matrix contains non-finite values")
    if np.any(matrix < 0):
        raise ValueError("distance matrix contains negative values")
    if not np.allclose(matrix, matrix.T):
        raise ValueError("distance matrix must be symmetric")
    return matrix


def core_distances(distance_matrix: np.ndarray, min_samples: int) -> np.ndarray:
    """Distance to the min_samples-th nearest neighbour, counting self."""
    k = min(min_samples, distance_matrix.shape[0]) - 1
    return np.partition(distance_matrix, k, axis=1)[:, k]


def mutual_reachability(distance_matrix: np.ndarray, min_samples: int) -> np.ndarray:
    """max(core_i, core_j, d_ij) with a zero diagonal."""
    core = core_distances(distance_matrix, min_samples)
    graph = np.maximum(distance_matrix, core[:, None])
    graph = np.maximum(graph, core[None, :])
    np.fill_diagonal(graph, 0.0)
    return graph


def minimum_spanning_tree(graph: np.ndarray) -> np.ndarray:
    """Prim's algorithm over a dense graph; rows are (u, v, weight).

    The recorded u is the previously attached node, which is sufficient for
    single-linkage because every attached node already shares a component.
    """
    n = graph.shape[0]
    edges = np.empty((n - 1, 3))
    remaining = np.arange(n)
    best = np.full(n, np.inf)
    current = 0
    for i in range(n - 1):
        keep = remaining != current
        remaining = remaining[keep]
        best = np.minimum(best[keep], graph[current, remaining])
        pick = int(np.argmin(best))  # ties resolve to the lowest index
        edges[i] = (current, remaining[pick], best[pick])
        current = int(remaining[pick])
    return edges


def single_linkage(mst_edges: np.ndarray) -> np.ndarray:
    """Union-find pass turning sorted MST edges into dendrogram rows.

    Row i holds (left_component, right_component, distance, merged_size)
    with new components numbered n + i, matching the usual linkage layout.
    """
    order = np.argsort(mst_edges[:, 2], kind="stable")
    mst_edges = mst_edges[order]
    n = mst_edges.shape[0] + 1
    parent = np.full(2 * n - 1, -1, dtype=np.intp)
    size = np.ones(2 * n - 1, dtype=np.intp)
    rows = np.empty((n - 1, 4))
    next_label = n

    def find(x: int) -> int:
        root = x
        while parent[root] != -1:
            root = parent[root]
        while parent[x] != -1:
            parent[x], x = root, parent[x]
        return root

    for i in range(n - 1):
        a = find(int(mst_edges[i, 0]))
        b = find(int(mst_edges[i, 1]))
        rows[i] = (a, b, mst_edges[i, 2], size[a] + size[b])
        parent[a] = parent[b] = next_label
        size[next_label] = size[a] + size[b]
        next_label += 1
    return rows


def _bfs_hierarchy(hierarchy: np.ndarray, start: int) -> list[int]:
    n = hierarchy.shape[0] + 1
    frontier = [start]
    visited: list[int] = []
    while frontier:
        visited.extend(frontier)
        frontier = [
            int(child)
            for node in frontier
            if node >= n
            for child in hierarchy[node - n, :2]
        ]
    return visited


def condense_tree(hierarchy: np.ndarray, min_cluster_size: int) -> np.ndarray:
    """Collapse the dendrogram into (parent, child, lambda, child_size) rows.

    Splits where both sides reach min_cluster_size spawn two new clusters;
    otherwise the parent cluster continues and the small side's points fall
    out individually at that level's lambda = 1/distance.
    """
    n = hierarchy.shape[0] + 1
    root = 2 * n - 2
    relabel = np.empty(root + 1, dtype=np.intp)
    relabel[root] = n
    next_label = n + 1
    ignore = np.zeros(root + 1, dtype=bool)
    rows: list[tuple[int, int, float, int]] = []

    def shed_points(subtree_root: int, parent_label: int, lam: float) -> None:
        for node in _bfs_hierarchy(hierarchy, subtree_root):
            if node < n:
                rows.append((parent_label, node, lam, 1))
            ignore[node] = True

    for node in _bfs_hierarchy(hierarchy, root):
        if ignore[node] or node < n:
            continue
        left = int(hierarchy[node - n, 0])
        right = int(hierarchy[node - n, 1])
        distance = hierarchy[node - n, 2]
        lam = 1.0 / distance if distance > 0.0 else np.inf
        left_size = int(hierarchy[left - n, 3]) if left >= n else 1
        right_size = int(hierarchy[right - n, 3]) if right >= n else 1
        label = int(relabel[node])

        if left_size >= min_cluster_size and right_size >= min_cluster_size:
            relabel[left] = next_label
            rows.append((label, next_label, lam, left_size))
            next_label += 1
            relabel[right] = next_label
            rows.append((label, next_label, lam, right_size))
            next_label += 1
        elif left_size < min_cluster_size and right_size < min_cluster_size:
            shed_points(left, label, lam)
            shed_points(right, label, lam)
        elif left_size < min_cluster_size:
            relabel[right] = label
            shed_points(left, label, lam)
        else:
            relabel[left] = label
            shed_points(right, label, lam)

    return np.array(
        rows,
        dtype=[
            ("parent", np.intp),
            ("child", np.intp),
            ("lambda_val", np.float64),
            ("child_size", np.intp),
        ],
    )


def compute_stability(condensed: np.ndarray) -> dict[int, float]:
    """Excess-of-mass stability per cluster id."""
    root = int(condensed["parent"].min())
    births: dict[int, float] = {
        int(child): float(lam)
        for child, lam in zip(condensed["child"], condensed["lambda_val"])
    }
    births[root] = 0.0
    stability: dict[int, float] = {
        cid: 0.0 for cid in range(root, int(condensed["parent"].max()) + 1)
    }
    for parent, lam, size in zip(
        condensed["parent"], condensed["lambda_val"], condensed["child_size"]
    ):
        stability[int(parent)] += (float(lam) - births[int(parent)]) * int(size)
    return stability


def _bfs_cluster_tree(cluster_rows: np.ndarray, start: int) -> list[int]:
    frontier = [start]
    visited: list[int] = []
    while frontier:
        visited.extend(frontier)
        frontier = [
            int(c) for c in cluster_rows["child"][np.isin(cluster_rows["parent"], frontier)]
        ]
    return visited


def select_clusters_eom(
    condensed: np.ndarray,
    stability: dict[int, float],
    allow_single_cluster: bool = False,
) -> set[int]:
    """Excess-of-mass selection: keep a cluster unless its children beat it.

    The root competes only when allow_single_cluster is set; otherwise a
    dataset whose only stable cluster is the whole of it yields no clusters.
    """
    node_list = sorted(stability.keys(), reverse=True)
    if not allow_single_cluster:
        node_list = node_list[:-1]
    cluster_rows = condensed[condensed["child_size"] > 1]
    is_cluster = {node: True for node in node_list}
    running = dict(stability)
    for node in node_list:
        children = cluster_rows["child"][cluster_rows["parent"] == node]
        subtree = sum(running[int(c)] for c in children)
        if subtree > running[node]:
            is_cluster[node] = False
            running[node] = subtree
        else:
            for sub in _bfs_cluster_tree(cluster_rows, node):
                if sub != node:
                    is_cluster[sub] = False
    return {node for node, keep in is_cluster.items() if keep}


def label_points(
    condensed: np.ndarray,
    clusters: set[int],
    allow_single_cluster: bool = False,
) -> np.ndarray:
    """Assign each point the nearest selected ancestor cluster, else NOISE.

    When the root itself is the single selected cluster, a point belongs
    only if it persisted to the highest density level among the root's
    children; everything shed earlier stays noise.
    """
    root = int(condensed["parent"].min())
    labels = np.full(root, NOISE, dtype=np.intp)
    label_of = {cid: i for i, cid in enumerate(sorted(clusters))}
    parent_of: dict[int, int] = {}
    lambda_of: dict[int, float] = {}
    for parent, child, lam in zip(
        condensed["parent"], condensed["child"], condensed["lambda_val"]
    ):
        parent_of[int(child)] = int(parent)
        lambda_of[int(child)] = float(lam)
    root_threshold = None
    if allow_single_cluster and clusters == {root}:
        root_threshold = condensed["lambda_val"][condensed["parent"] == root].max()

    for point in range(root):
        node = point
        while node in parent_of:
            node = parent_of[node]
            if node in clusters:
                if root_threshold is not None and node == root:
                    if lambda_of[point] >= root_threshold:
                        labels[point] = label_of[node]
                else:
                    labels[point] = label_of[node]
                break
    return labels


def cluster_labels(
    distance_matrix: np.ndarray,
    min_cluster_size: int = 3,
    min_samples: int = 2,
    allow_single_cluster: bool = False,
) -> np.ndarray:
    """Full pipeline from a precomputed distance matrix to labels.

    Fewer points than min_cluster_size (or fewer than two) cannot form a
    cluster, so every point is NOISE.
    """
    matrix = _validate_matrix(distance_matrix)
    n = matrix.shape[0]
    if min_cluster_size < 2:
        raise ValueError("min_cluster_size must be >= 2")
    if min_samples < 1:
        raise ValueError("min_samples must be >= 1")
    if n < 2 or n < min_cluster_size:
        return np.full(n, NOISE, dtype=np.intp)
    graph = mutual_reachability(matrix, min_samples)
    mst = minimum_spanning_tree(graph)
    hierarchy = single_linkage(mst)
    condensed = condense_tree(hierarchy, min_cluster_size)
    stability = compute_stability(condensed)
    clusters = select_clusters_eom(condensed, stability, allow_single_cluster)
    return label_points(condensed, clusters, allow_single_cluster)


class HDBSCAN:
    """Estimator-style wrapper over cluster_labels.

    Follows the fit/fit_predict convention with a precomputed distance
    matrix as X, so it drops into pipelines that expect that interface.
    """

    def __init__(
        self,
        min_cluster_size: int = 3,
        min_samples: int = 2,
        allow_single_cluster: bool = False,
    ):
        self.min_cluster_size = min_cluster_size
        self.min_samples = min_samples
        self.allow_single_cluster = allow_single_cluster

    def get_params(self, deep: bool = True) -> dict:
        return {
            "min_cluster_size": self.min_cluster_size,
            "min_samples": self.min_samples,
            "allow_single_cluster": self.allow_single_cluster,
        }

    def set_params(self, **params) -> "HDBSCAN":
        for key, value in params.items():
            if key not in self.get_params():
                raise ValueError(f"unknown parameter {key!r}")
            setattr(self, key, value)
        return self

    def fit(self, X, y=None) -> "HDBSCAN":
        self.labels_ = cluster_labels(
            X,
            min_cluster_size=self.min_cluster_size,
            min_samples=self.min_samples,
            allow_single_cluster=self.allow_single_cluster,
        )
        return self

    def fit_predict(self, X, y=None) -> np.ndarray:
        return self.fit(X).labels_
