import networkx as nx
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import graphs, path_graph, permutations, random_graph, two_edges
from oracles import dynamic_centroids_oracle
from lapool_lab import autodiff as ad
from lapool_lab.graph import Graph, connected_components, permute
from lapool_lab.gradcheck import certify
from lapool_lab.layers import Dense
from lapool_lab.pooling import (
    LaPool,
    PoolConfig,
    assign_clusters,
    coarsen,
    distance_weights,
    lapool_layer,
    select_centroids_dynamic,
    select_centroids_topk,
    signal_variation,
)

K2 = np.array([[0.0, 1.0], [1.0, 0.0]])


def identity_mpsi(d):
    layer = Dense(d, d, "linear")
    layer.weight.value = np.eye(d)
    return layer


def connected_atlas(max_n=7):
    """Every connected graph on 1..max_n nodes, one per isomorphism class."""
    for G in nx.graph_atlas_g():
        if 0 < G.number_of_nodes() <= max_n and nx.is_connected(G):
            yield nx.to_numpy_array(G, nodelist=sorted(G.nodes()))


class TestSignalVariation:
    def test_p3(self):
        assert np.array_equal(signal_variation(path_graph(3), [[0.0], [1.0], [0.0]]), [1.0, 2.0, 1.0])

    def test_k2(self):
        g = Graph(node_features=np.zeros((2, 2)), adjacency=K2)
        assert np.allclose(signal_variation(g, [[0.0, 0.0], [3.0, 4.0]]), [5.0, 5.0])

    @given(graphs(max_n=8), st.floats(-3, 3))
    def test_constant_signal(self, g, c):
        assert np.abs(signal_variation(g, np.full((g.n, 2), c))).max() < 1e-12

    def test_hop_power(self):
        S = signal_variation(path_graph(3), [[0.0], [1.0], [0.0]], h=2)
        assert np.allclose(S, [3.0, 6.0, 3.0])

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            signal_variation(path_graph(3), np.zeros((2, 1)))


class TestTopK:
    def test_examples(self):
        assert list(select_centroids_topk([1, 2, 1], 1)) == [1]
        assert list(select_centroids_topk([1, 2, 1], 2)) == [0, 1]
        assert list(select_centroids_topk([5, 5, 5], 3)) == [0, 1, 2]

    def test_range(self):
        with pytest.raises(ValueError):
            select_centroids_topk([1, 2], 3)
        with pytest.raises(ValueError):
            select_centroids_topk([1, 2], 0)

    @given(st.lists(st.integers(0, 4), min_size=1, max_size=9), st.data())
    def test_brute_force(self, S, data):
        k = data.draw(st.integers(1, len(S)))
        ranked = sorted(range(len(S)), key=lambda i: (-S[i], i))[:k]
        assert list(select_centroids_topk(S, k)) == sorted(ranked)


class TestDynamic:
    def test_examples(self):
        assert list(select_centroids_dynamic(path_graph(3), [1, 2, 1])) == [1]
        tri = Graph(node_features=np.zeros((3, 1)), adjacency=np.ones((3, 3)) - np.eye(3))
        assert list(select_centroids_dynamic(tri, [0, 0, 0])) == [0]
        assert list(select_centroids_dynamic(two_edges(), [3, 1, 2, 1])) == [0, 2]

    def test_matches_literal_scan_on_all_small_connected_graphs(self, rng):
        count = 0
        for A in connected_atlas(7):
            n = A.shape[0]
            g = Graph(node_features=np.zeros((n, 1)), adjacency=A)
            candidates = [rng.random(n), rng.integers(0, 3, n).astype(float), np.zeros(n)]
            candidates.append(signal_variation(g, rng.standard_normal((n, 2))))
            for S in candidates:
                assert list(select_centroids_dynamic(g, S)) == dynamic_centroids_oracle(A, S)
            count += 1
        assert count == 996  # connected graphs on 1..7 nodes up to isomorphism (853 on 7)

    @given(graphs(max_n=8), st.data())
    def test_one_centroid_per_component_with_unique_max(self, g, data):
        S = np.array(data.draw(st.permutations(list(range(1, g.n + 1)))), dtype=float)
        chosen = set(select_centroids_dynamic(g, S))
        comps = connected_components(g)
        for c in np.unique(comps):
            assert chosen & set(np.flatnonzero(comps == c))

    @given(graphs(min_n=2, max_n=8), st.floats(0.01, 100))
    def test_scale_covariance(self, g, c):
        X = g.node_features
        S, Sc = signal_variation(g, X), signal_variation(g, c * X)
        assert np.allclose(Sc, c * S, rtol=1e-9, atol=1e-12)
        # compare selections only when the scaled ordering is numerically unambiguous
        gaps = np.abs(S[:, None] - S[None, :])
        if np.all((gaps > 1e-9) | (gaps == 0)) and not np.any((S > 0) & (S < 1e-9)):
            assert np.array_equal(select_centroids_dynamic(g, S), select_centroids_dynamic(g, Sc))
            for k in range(1, g.n + 1):
                assert np.array_equal(select_centroids_topk(S, k), select_centroids_topk(Sc, k))


class TestDistanceWeights:
    def test_examples(self):
        beta = distance_weights(path_graph(3), [1])
        assert beta[0, 0] == 1.0 and beta[2, 0] == 1.0
        beta = distance_weights(two_edges(), [0])
        assert beta[1, 0] == 1.0 and beta[2, 0] == 0.0 and beta[3, 0] == 0.0
        assert distance_weights(path_graph(4), [0])[3, 0] == pytest.approx(1 / 3)

    def test_hop_mask_and_off(self):
        assert np.array_equal(distance_weights(path_graph(4), [0], "hop_mask", 2)[:, 0], [1, 1, 1, 0])
        assert np.array_equal(distance_weights(two_edges(), [0, 2], "off"), np.ones((4, 2)))

    def test_empty(self):
        with pytest.raises(ValueError):
            distance_weights(path_graph(3), [])


class TestAssignment:
    def test_single_centroid(self):
        g = path_graph(3, [[0.0], [1.0], [0.5]])
        C = assign_clusters(g.node_features, [1], distance_weights(g, [1])).value
        assert np.array_equal(C, np.ones((3, 1)))

    def test_symmetric_follower_splits_evenly(self):
        X = np.array([[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        g = path_graph(3, X)
        C = assign_clusters(X, [0, 2], distance_weights(g, [0, 2])).value
        assert np.allclose(C[1], [0.5, 0.5])

    def test_two_components(self):
        g = two_edges([[1.0], [1.0], [1.0], [1.0]])
        C = assign_clusters(g.node_features, [0, 2], distance_weights(g, [0, 2])).value
        assert np.array_equal(C, [[1, 0], [1, 0], [0, 1], [0, 1]])

    def test_unreachable_follower_gets_zero_row(self):
        g = two_edges([[1.0], [1.0], [1.0], [1.0]])
        C = assign_clusters(g.node_features, [0], distance_weights(g, [0])).value
        assert np.array_equal(C[:, 0], [1, 1, 0, 0])

    def test_zero_features_do_not_break_rows(self):
        g = path_graph(3, np.zeros((3, 2)))
        C = assign_clusters(g.node_features, [0, 2], distance_weights(g, [0, 2])).value
        assert np.allclose(C[1], [0.5, 0.5]) and np.all(np.isfinite(C))

    def test_empty_centroids(self):
        with pytest.raises(ValueError):
            assign_clusters(np.ones((2, 1)), [], np.ones((2, 0)))


class TestCoarsen:
    def test_identity_pooling(self, rng):
        g = random_graph(rng, 5)
        A_new, X_new = coarsen(g.adjacency, g.node_features, np.eye(5), identity_mpsi(2))
        assert np.array_equal(A_new.value, g.adjacency) and np.array_equal(X_new.value, g.node_features)

    def test_p3_single_cluster(self):
        g = path_graph(3, [[1.0], [2.0], [4.0]])
        C = np.ones((3, 1))
        A_new, X_new = coarsen(g.adjacency, g.node_features, C, identity_mpsi(1), zero_diagonal=False)
        assert A_new.value[0, 0] == 4.0
        A_new, X_new = coarsen(g.adjacency, g.node_features, C, identity_mpsi(1))
        assert A_new.value[0, 0] == 0.0 and X_new.value[0, 0] == 7.0

    def test_block_assignment_keeps_components_apart(self):
        g = two_edges([[1.0], [2.0], [3.0], [4.0]])
        C = np.array([[1, 0], [1, 0], [0, 1], [0, 1.0]])
        A_new, _ = coarsen(g.adjacency, g.node_features, C, zero_diagonal=False)
        assert np.array_equal(A_new.value, [[2, 0], [0, 2]])

    def test_shape_error(self):
        with pytest.raises(ad.ShapeError):
            coarsen(np.zeros((3, 3)), np.zeros((3, 1)), np.ones((2, 1)))


class TestLayer:
    def test_p3_pipeline(self):
        g = path_graph(3, [[0.0], [1.0], [0.0]])
        pooled, X_new, info = lapool_layer(g, g.node_features, PoolConfig())
        assert pooled.n == 1 and np.array_equal(pooled.adjacency, [[0.0]])
        assert np.array_equal(X_new.value, [[1.0]]) and list(info.centroids) == [1]

    def test_topk_n_keeps_graph(self, rng):
        g = random_graph(rng, 6, p=0.5)
        pooled, _, info = lapool_layer(g, g.node_features, PoolConfig(method="topk", k=6))
        assert np.array_equal(info.affinity, np.eye(6))
        assert np.array_equal(pooled.adjacency, g.adjacency)

    @given(graphs(min_n=2, max_n=9))
    def test_disconnected_input_stays_disconnected(self, g):
        _, _, info = lapool_layer(g, g.node_features, PoolConfig())
        comps = connected_components(g)
        A_new, _ = coarsen(g.adjacency, g.node_features, info.affinity, zero_diagonal=False)
        owner = comps[info.centroids]
        for i in range(info.m):
            for j in range(info.m):
                if owner[i] != owner[j]:
                    assert A_new.value[i, j] == 0.0

    @given(graphs(min_n=2, max_n=8, d=2), st.data())
    def test_permutation_equivariance_with_strict_ordering(self, g, data):
        S = signal_variation(g, g.node_features)
        if np.unique(np.round(S, 9)).size < g.n:
            return
        p = data.draw(permutations(g.n))
        _, X1, info1 = lapool_layer(g, g.node_features, PoolConfig())
        h = permute(g, p)
        _, X2, info2 = lapool_layer(h, h.node_features, PoolConfig())
        # node i of h is node p[i] of g
        old = p[info2.centroids]
        assert np.array_equal(np.sort(old), info1.centroids)
        order = np.argsort(old)
        assert np.allclose(X2.value[order], X1.value, atol=1e-10)

    def test_module_parameters_are_only_mpsi(self):
        layer = LaPool(4, 3, PoolConfig())
        assert layer.num_parameters() == 4 * 3 + 3

    def test_config_validation(self):
        with pytest.raises(ValueError):
            PoolConfig(method="topk")
        with pytest.raises(ValueError):
            PoolConfig(beta_mode="cosine")
        with pytest.raises(ValueError):
            PoolConfig(h=0)

    def test_gradient_through_frozen_selection(self):
        assert certify("lapool_frozen", points=20, seed=3).max_error < 1e-5
