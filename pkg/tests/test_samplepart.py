import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sampledt.graphpart import cut_weight
from sampledt.samplepart import (KNotPowerOfTwo, PartitionConfig,
                                 PartitionWarning, SampleRule, SampleTooSmall,
                                 assign_points, build_sample_graph,
                                 cyclic_partition, draw_sample, edge_weight,
                                 edge_weight_real, partition_points,
                                 sample_edges, sample_size, scale_weights,
                                 weight_fn_name)
from sampledt.seqdt import triangulate_seq
from sampledt.tristore import NONE, Triangulation, canonicalize

import oracles


# -- sampling ---------------------------------------------------------------

def test_sqrt_rule_million():
    assert draw_sample(10 ** 6, "sqrt", seed=0).shape == (1000,)


def test_fraction_rule():
    ids = draw_sample(10000, SampleRule("fraction", 0.01), seed=0)
    assert ids.shape == (100,)
    assert np.unique(ids).shape == (100,)


def test_log_rule():
    assert SampleRule.parse("log").size(10 ** 6) == round(math.log(10 ** 6))


def test_sample_deterministic_per_seed():
    a = draw_sample(5000, "sqrt", seed=3)
    b = draw_sample(5000, "sqrt", seed=3)
    c = draw_sample(5000, "sqrt", seed=4)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_sample_from_id_subset():
    ids = np.arange(100, 1100, 2)
    s = draw_sample(ids, "sqrt", seed=0, dim=2)
    assert np.all(np.isin(s, ids))


def test_sample_clamped_with_warning():
    sink = []
    with pytest.warns(PartitionWarning):
        eta = sample_size(30, SampleRule.parse("log"), dim=3, k=1, sink=sink)
    assert eta == 5 and sink


def test_sample_clamped_to_twice_k():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PartitionWarning)
        assert sample_size(400, SampleRule.parse("log"), 2, k=8, sink=[]) == 16


def test_sample_too_small():
    with pytest.raises(SampleTooSmall):
        sample_size(3, SampleRule.parse("sqrt"), dim=2)


def test_sample_rule_validation():
    with pytest.raises(ValueError):
        SampleRule("fraction", 0.7)
    with pytest.raises(ValueError):
        SampleRule.parse("cube")
    assert str(SampleRule.parse("frac=0.02")) == "frac=0.02"


def test_sample_is_uniform():
    # every id should be drawn about equally often across seeds
    counts = np.zeros(100)
    for seed in range(2000):
        counts[draw_sample(100, "sqrt", seed=seed, dim=2)] += 1
    expected = 2000 * 10 / 100
    chi2 = ((counts - expected) ** 2 / expected).sum()
    # 99 dof, p = 0.001 critical value is about 148
    assert chi2 < 148


# -- weights ----------------------------------------------------------------

def test_inverse_weight():
    assert edge_weight((0, 0), (0.25, 0), "inverse", 1.0) == pytest.approx(4)


def test_logarithmic_weight_natural_log():
    assert edge_weight((0, 0), (0.25, 0), "log", 1.0) == \
        pytest.approx(math.log(4))


def test_linear_weight_at_max_diagonal():
    assert edge_weight((0, 0), (1, 1), "linear", math.sqrt(2)) == \
        pytest.approx(0.0)


def test_constant_weight():
    assert edge_weight((0, 0), (0.3, 0.1), "constant", 1.0) == 1.0


def test_distance_clamped():
    assert np.isfinite(edge_weight_real(0.0, "inverse"))
    assert edge_weight_real(0.0, "inverse") == pytest.approx(1e12)


def test_weight_names():
    assert weight_fn_name("log") == "logarithmic"
    with pytest.raises(ValueError):
        weight_fn_name("quadratic")


def test_scale_weights_range_and_order():
    r = np.array([0.1, 5.0, 2.0, 0.1])
    w = scale_weights(r)
    assert w.tolist() == [1, 1000, round(1 + 999 * 1.9 / 4.9), 1]
    assert scale_weights(np.full(5, 3.3)).tolist() == [1] * 5


@settings(max_examples=200)
@given(st.floats(1e-9, 1.0), st.floats(1e-9, 1.0),
       st.sampled_from(["inverse", "logarithmic", "linear"]))
def test_shorter_edges_never_lighter(d1, d2, fn):
    a, b = sorted([d1, d2])
    assert edge_weight_real(a, fn) >= edge_weight_real(b, fn)


# -- sample graph -----------------------------------------------------------

def test_graph_single_triangle():
    P = np.array([(0., 0), (1, 0), (0, 1)])
    G = build_sample_graph(triangulate_seq(P), "constant")
    assert G.edge_count == 3


def test_graph_two_triangles():
    P = np.array([(0., 0), (1, 0), (0, 1), (1, 1)])
    T = Triangulation(P, np.array([[0, 1, 2], [1, 2, 3]]),
                      np.full((2, 3), NONE))
    G = build_sample_graph(T, "constant")
    assert G.edge_count == 5


@pytest.mark.parametrize("dim", [2, 3])
def test_graph_edges_match_independent_enumeration(dim):
    P = np.random.default_rng(dim).random((100, dim))
    T = triangulate_seq(P)
    G = build_sample_graph(T, "logarithmic")
    ref = oracles.edges_of(canonicalize(T).tolist())
    e, w = G.edge_list()
    assert {tuple(x) for x in G.vertex_ids[e].tolist()} == ref
    assert G.edge_count == len(ref)
    assert w.min() >= 1 and w.max() <= 1000
    assert len(sample_edges(T)) == len(ref)


def test_graph_weights_use_bounding_box_diagonal():
    P = np.array([(0., 0), (2, 0), (0, 1)])
    G = build_sample_graph(triangulate_seq(P), "linear")
    assert G.d_star == pytest.approx(math.sqrt(5))


# -- assignment -------------------------------------------------------------

def test_assign_nearest():
    P = np.array([(0., 0), (1, 0), (0.2, 0.1)])
    part = assign_points(P, [0, 1], [0, 1], ids=[2], k=2)
    assert part.labels.tolist() == [0]


def test_assign_tie_goes_to_lowest_id():
    P = np.array([(0., 0), (1, 0), (0.5, 0)])
    assert assign_points(P, [0, 1], [0, 1], ids=[2]).labels.tolist() == [0]
    # reversed ids: the point with id 0 is still preferred
    P2 = np.array([(1., 0), (0, 0), (0.5, 0)])
    assert assign_points(P2, [0, 1], [1, 0], ids=[2]).labels.tolist() == [1]


def test_assign_matches_linear_scan_100k():
    rng = np.random.default_rng(0)
    P = rng.random((100000, 3))
    sample = np.sort(rng.choice(100000, 316, replace=False))
    labels = np.arange(316)
    got = assign_points(P, sample, labels).labels
    ref = np.empty(100000, dtype=np.int64)
    for lo in range(0, 100000, 10000):
        ref[lo:lo + 10000] = oracles.nearest_brute(P[lo:lo + 10000],
                                                   P[sample], sample)
    np.testing.assert_array_equal(got, ref)


def test_assign_lattice_ties():
    # integer lattice: many points equidistant to 2 or 4 samples
    g = np.arange(0, 21, dtype=float)
    P = np.array([(x, y) for x in g for y in g])
    idx = np.flatnonzero((P[:, 0] % 2 == 0) & (P[:, 1] % 2 == 0))
    rng = np.random.default_rng(1)
    sample = np.sort(rng.choice(idx, 40, replace=False))
    got = assign_points(P, sample, np.arange(40)).labels
    ref = oracles.nearest_brute(P, P[sample], sample)
    np.testing.assert_array_equal(got, ref)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(1, 300), st.sampled_from([2, 3]))
def test_assign_randomized(seed, m, dim):
    rng = np.random.default_rng(seed)
    P = np.round(rng.random((2000, dim)) * 8) / 8  # coarse grid => ties
    P = np.unique(P, axis=0)
    m = min(m, P.shape[0])
    sample = np.sort(rng.choice(P.shape[0], m, replace=False))
    got = assign_points(P, sample, np.arange(m)).labels
    np.testing.assert_array_equal(got, oracles.nearest_brute(P, P[sample],
                                                             sample))


# -- full divide step -------------------------------------------------------

def test_partition_points_uniform_balance():
    P = np.random.default_rng(0).random((10000, 3))
    part = partition_points(P, PartitionConfig("sqrt", "log", k=4, seed=1))
    sizes = part.sizes()
    assert sizes.shape == (4,)
    assert np.all(sizes >= 0.5 * 2500) and np.all(sizes <= 2.0 * 2500)
    # parts are a partition of the ids
    allids = np.sort(np.concatenate(part.parts))
    np.testing.assert_array_equal(allids, np.arange(10000))
    for j, p in enumerate(part.parts):
        assert np.all(part.labels[p] == j)
    assert part.cut == cut_weight(part.graph, part.graph_partition.labels)


def test_partition_points_k1():
    P = np.random.default_rng(0).random((100, 2))
    part = partition_points(P, PartitionConfig(k=1))
    assert part.k == 1 and part.parts[0].tolist() == list(range(100))


@pytest.mark.parametrize("seed", range(12))
def test_partition_points_two_bubbles_are_kept_whole(seed):
    rng = np.random.default_rng(seed)
    which = rng.integers(0, 2, 10000)
    centers = np.array([(0.25, 0.25), (0.75, 0.75)])
    P = centers[which] + rng.normal(0, 0.05, (10000, 2))
    part = partition_points(P, PartitionConfig("sqrt", "log", k=2,
                                               seed=seed))
    sample_bubble = which[part.sample_point_ids]
    counts = np.bincount(sample_bubble, minlength=2)
    U = math.floor(1.05 * math.ceil(counts.sum() / 2))
    excess = max(0, counts.max() - U)
    # sample vertices that landed in the part of the other bubble
    moved = 0
    for b in (0, 1):
        lab = part.sample_labels[sample_bubble == b]
        moved += lab.shape[0] - np.bincount(lab, minlength=2).max()
    purity = min(np.bincount(part.labels[which == b], minlength=2).max() /
                 (which == b).sum() for b in (0, 1))
    if excess == 0:
        assert purity >= 0.99
    else:
        # balance forces `excess` sample vertices across; no more than that
        assert moved == excess
        assert purity >= 1 - 2.0 * excess / counts.max()


def test_partition_points_too_few():
    with pytest.raises(SampleTooSmall):
        partition_points(np.random.default_rng(0).random((10, 2)),
                         PartitionConfig(k=4))


def test_partition_points_deterministic():
    P = np.random.default_rng(0).random((3000, 2))
    cfg = PartitionConfig("sqrt", "inverse", k=8, seed=9)
    np.testing.assert_array_equal(partition_points(P, cfg).labels,
                                  partition_points(P, cfg).labels)


# -- cyclic baseline ----------------------------------------------------------

LINE = np.array([(0., 0), (1, 0), (2, 0), (3, 0)])


def test_cyclic_k2_splits_along_x():
    part = cyclic_partition(LINE, 2)
    assert [p.tolist() for p in part.parts] == [[0, 1], [2, 3]]


def test_cyclic_k4_second_level_along_y():
    P = np.array([(0., 1), (1, 0), (2, 1), (3, 0)])
    part = cyclic_partition(P, 4)
    # second level splits by y within each x-half
    assert [p.tolist() for p in part.parts] == [[1], [0], [3], [2]]


def test_cyclic_uniform_exact_sizes():
    P = np.random.default_rng(0).random((10000, 3))
    sizes = cyclic_partition(P, 16).sizes()
    assert sizes.min() >= 10000 // 16 and sizes.max() <= 10000 // 16 + 1


def test_cyclic_requires_power_of_two():
    with pytest.raises(KNotPowerOfTwo):
        cyclic_partition(LINE, 3)
