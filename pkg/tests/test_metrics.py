import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mbtrees.frag import DislocationSpec, simulate_marginal_tree
from mbtrees.mb_core import sample_mb_tree
from mbtrees.metrics import (LeafLabeledMetricTree, distance_matrix, four_point_violation, gromov_products_ok,
                             ks_critical, ks_statistic, labeled_tree_distance)
from mbtrees.models import KernelModel

KERNEL = KernelModel("two_type_mixed", {}).build(40)
TWO_TYPE = DislocationSpec((
    [(1.0, [(0.6, 1), (0.4, 2)]), (0.5, [(1.0, 2)])],
    [(2.0, [(0.5, 2), (0.3, 1), (0.2, 1)])],
), 0.5)


def test_single_leaf():
    t = sample_mb_tree(KERNEL, 1, 1, np.random.default_rng(0))
    m = distance_matrix(t, [1])
    assert m.matrix.tolist() == [[0, 0], [0, 0]]
    assert m.is_integer


def test_two_leaves_on_a_cherry():
    t = LeafLabeledMetricTree((1, 2), np.array([[0.0, 1.5, 2.0], [1.5, 0.0, 2.5], [2.0, 2.5, 0.0]]))
    assert t.depths.tolist() == [1.5, 2.0]
    assert t.distances[0, 1] == 2.5
    assert gromov_products_ok(t)


@pytest.mark.parametrize("seed", range(5))
def test_distances_match_graph_shortest_paths(seed):
    rng = np.random.default_rng(seed)
    t = sample_mb_tree(KERNEL, 30, 1, rng)
    g = nx.Graph()
    g.add_edges_from((v, int(p)) for v, p in enumerate(t.parent) if p >= 0)
    g.add_node(0)
    labels = list(range(1, 31))
    m = distance_matrix(t, labels)
    nodes = [0] + [t.node_of_label(b) for b in labels]
    sp = dict(nx.all_pairs_shortest_path_length(g))
    want = np.array([[sp[a][b] for b in nodes] for a in nodes])
    assert np.array_equal(m.matrix, want)


def test_four_point_on_random_trees():
    rng = np.random.default_rng(6)
    for _ in range(1000):
        n = int(rng.integers(4, 12))
        t = sample_mb_tree(KERNEL, n, 1, rng)
        m = distance_matrix(t, range(1, 5))
        assert four_point_violation(m) == 0
        assert gromov_products_ok(m)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**32))
def test_four_point_on_real_trees(k, seed):
    t = simulate_marginal_tree(TWO_TYPE, 1, k, np.random.default_rng(seed))
    m = distance_matrix(t, range(1, k + 1))
    assert not m.is_integer
    assert four_point_violation(m) <= 1e-9
    assert gromov_products_ok(m)


def test_four_point_detects_non_tree():
    # a 4-cycle with unit edges is not a tree metric
    d = np.array([[0, 1, 2, 1], [1, 0, 1, 2], [2, 1, 0, 1], [1, 2, 1, 0]])
    assert four_point_violation(LeafLabeledMetricTree((1, 2, 3), d)) == 2


def test_odd_gromov_product_rejected():
    d = np.array([[0, 1, 1], [1, 0, 1], [1, 1, 0]])
    assert not gromov_products_ok(LeafLabeledMetricTree((1, 2), d))


# ---------------------------------------------------------------- labeled distance


def test_labeled_distance_zero_and_scaling():
    t = distance_matrix(sample_mb_tree(KERNEL, 20, 1, np.random.default_rng(7)), [1, 2, 3])
    assert labeled_tree_distance(t, t) == 0.0
    scaled = LeafLabeledMetricTree(t.labels, t.matrix * 3.0)
    assert labeled_tree_distance(t, scaled) == pytest.approx(float(t.matrix.max()))


def test_labeled_distance_label_mismatch():
    a = LeafLabeledMetricTree((1, 2), np.zeros((3, 3)))
    b = LeafLabeledMetricTree((1, 3), np.zeros((3, 3)))
    with pytest.raises(ValueError):
        labeled_tree_distance(a, b)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 2**32), min_size=3, max_size=3), st.integers(3, 20))
def test_labeled_distance_is_a_pseudometric(seeds, n):
    a, b, c = (distance_matrix(sample_mb_tree(KERNEL, n, 1, np.random.default_rng(s)), [1, 2, 3])
               for s in seeds)
    d = labeled_tree_distance
    assert d(a, b) == d(b, a)
    assert d(a, c) <= d(a, b) + d(b, c) + 1e-12


# ---------------------------------------------------------------- KS and CSV


def test_ks_examples():
    assert ks_statistic([0.5], cdf=lambda x: np.clip(x, 0, 1)) == pytest.approx(0.5)
    assert ks_statistic([1, 2, 3], [1, 2, 3]) == 0.0
    assert ks_statistic([0, 0], [1, 1]) == 1.0


def test_ks_empty():
    with pytest.raises(ValueError):
        ks_statistic([], [1.0])
    with pytest.raises(ValueError):
        ks_statistic([1.0], [])


def test_ks_critical():
    assert ks_critical(10**4, 10**4, 0.05) == pytest.approx(1.358 * np.sqrt(2e-4), rel=1e-3)
    assert ks_critical(100) > ks_critical(10000)


def test_csv_roundtrip_integer_and_real():
    t = distance_matrix(sample_mb_tree(KERNEL, 12, 1, np.random.default_rng(8)), [1, 2, 3, 4])
    back = LeafLabeledMetricTree.from_csv(t.to_csv())
    assert back.labels == t.labels and np.array_equal(back.matrix, t.matrix) and back.is_integer
    r = distance_matrix(simulate_marginal_tree(TWO_TYPE, 1, 3, np.random.default_rng(9)), [1, 2, 3])
    back = LeafLabeledMetricTree.from_csv(r.to_csv())
    assert np.array_equal(back.matrix, r.matrix) and not back.is_integer
    assert t.to_csv().splitlines()[0] == "root,1,2,3,4"
