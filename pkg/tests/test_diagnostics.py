"""Tests for clustering/selection diagnostics."""

from fractions import Fraction

import numpy as np
import pytest
from sklearn.metrics import adjusted_rand_score

import mixlasso as mx
from mixlasso.diagnostics import (CoClusterMatrix, MergeTree,
                                  adjusted_rand_index, align_labels, cocluster,
                                  degeneracy_trace, gamma_accuracy,
                                  hierarchical_cluster, order_by_mean_response,
                                  relabel, selection_frequency)
from mixlasso.pgibbs import draw_prior_state


# ----------------------------------------------------------------------- ARI

def test_ari_identical_partitions():
    u = np.array([0, 0, 1, 2, 2, 1])
    assert adjusted_rand_index(u, u) == pytest.approx(1.0)


def test_ari_crossed_pairs_value():
    # fully crossed 2x2 design: every same-pair in one partition is a
    # split pair in the other; the adjusted index is -1/2
    u = np.array([1, 1, 2, 2])
    v = np.array([1, 2, 1, 2])
    assert adjusted_rand_index(u, v) == pytest.approx(-0.5)
    assert adjusted_rand_score(u, v) == pytest.approx(-0.5)


def test_ari_matches_sklearn_on_random_cases():
    rng = np.random.default_rng(3)
    for _ in range(40):
        n = int(rng.integers(3, 40))
        u = rng.integers(0, rng.integers(2, 5), size=n)
        v = rng.integers(0, rng.integers(2, 5), size=n)
        assert adjusted_rand_index(u, v) == pytest.approx(
            adjusted_rand_score(u, v), abs=1e-12)


def test_ari_symmetric_and_permutation_invariant():
    rng = np.random.default_rng(5)
    u = rng.integers(0, 3, size=25)
    v = rng.integers(0, 3, size=25)
    assert adjusted_rand_index(u, v) == pytest.approx(adjusted_rand_index(v, u))
    perm = np.array([2, 0, 1])
    assert adjusted_rand_index(perm[u], v) == pytest.approx(
        adjusted_rand_index(u, v))


def test_ari_near_zero_under_random_labelings():
    rng = np.random.default_rng(7)
    vals = [adjusted_rand_index(rng.integers(0, 3, 60), rng.integers(0, 3, 60))
            for _ in range(400)]
    vals = np.asarray(vals)
    assert abs(vals.mean()) < 4 * vals.std(ddof=1) / np.sqrt(len(vals))


def test_ari_rejects_mismatched_lengths():
    with pytest.raises(ValueError):
        adjusted_rand_index(np.array([0, 1]), np.array([0, 1, 2]))


# --------------------------------------------------------------- align_labels

def test_align_identity_and_swap():
    ref = np.array([0, 0, 1, 1, 2])
    assert np.array_equal(align_labels(ref, ref, 3), [0, 1, 2])
    swapped = np.array([1, 1, 0, 0, 2])
    perm = align_labels(swapped, ref, 3)
    assert np.array_equal(perm, [1, 0, 2])
    assert np.array_equal(relabel(swapped, perm), ref)


def test_align_is_exhaustively_optimal():
    import itertools
    rng = np.random.default_rng(11)
    for _ in range(20):
        ref = rng.integers(0, 3, size=12)
        sample = rng.integers(0, 3, size=12)
        perm = align_labels(sample, ref, 3)
        best = np.sum(relabel(sample, perm) == ref)
        for other in itertools.permutations(range(3)):
            assert np.sum(np.array(other)[sample] == ref) <= best


def test_align_never_worse_than_identity():
    rng = np.random.default_rng(13)
    for _ in range(20):
        ref = rng.integers(0, 4, size=15)
        sample = rng.integers(0, 4, size=15)
        perm = align_labels(sample, ref, 4)
        assert (np.sum(relabel(sample, perm) == ref)
                >= np.sum(sample == ref))


def test_align_rejects_large_k():
    with pytest.raises(ValueError):
        align_labels(np.zeros(4, dtype=int), np.zeros(4, dtype=int), 9)


def test_order_by_mean_response():
    z = np.array([0, 0, 1, 1])
    y = np.array([1.0, 1.0, 5.0, 5.0])
    perm = order_by_mean_response(z, y, 2)
    # cluster 1 has the larger mean response so it becomes label 0
    assert np.array_equal(perm, [1, 0])


# -------------------------------------------------------------- gamma_accuracy

def test_gamma_accuracy_perfect_and_empty():
    truth = np.array([[1, 1, 0, 1], [1, 0, 1, 0]])
    assert gamma_accuracy(truth, truth) == (1.0, 1.0)
    none_found = truth.copy()
    none_found[:, 1:] = 0
    sens, spec = gamma_accuracy(none_found, truth)
    assert sens == 0.0 and spec == 1.0


def test_gamma_accuracy_half_half():
    truth = np.array([[1, 1, 0, 1, 0]])
    est = np.array([[1, 1, 1, 0, 0]])
    sens, spec = gamma_accuracy(est, truth)
    assert sens == pytest.approx(0.5)
    assert spec == pytest.approx(0.5)


def test_gamma_accuracy_undefined_sensitivity():
    truth = np.array([[1, 0, 0]])
    est = np.array([[1, 1, 0]])
    sens, spec = gamma_accuracy(est, truth)
    assert sens is None
    assert spec == pytest.approx(0.5)


# ------------------------------------------------------------ degeneracy_trace

def _tiny_problem(rng, n, K, N, **kw):
    hyper = mx.Hyperparameters(K=K, N=N, **kw)
    X = np.hstack([np.ones((n, 1)), rng.normal(size=(n, 1))])
    data = mx.Dataset(y=rng.normal(size=n), X=X)
    state = draw_prior_state(data, hyper, rng)
    return data, state, hyper


def test_trace_uniform_weights_no_resampling():
    # single component: every label conditional is a point mass, weights
    # stay flat, paths collapse to one
    rng = np.random.default_rng(17)
    data, state, hyper = _tiny_problem(rng, 6, 1, 30)
    system = mx.smc_run(data, state.s, state.gamma, state.tau2, hyper, rng)
    ess_over_n, unique = degeneracy_trace(system)
    assert np.allclose(ess_over_n, 1.0)
    assert np.allclose(unique, 1 / 30)
    assert system.resample_epochs == []


def test_trace_point_mass_resample_collapses_paths():
    # forced resampling with a single component collapses every path
    rng = np.random.default_rng(19)
    data, state, hyper = _tiny_problem(rng, 5, 1, 20)
    system = mx.smc_run(data, state.s, state.gamma, state.tau2, hyper, rng,
                        resampling="always")
    _, unique = degeneracy_trace(system)
    assert np.allclose(unique, 1 / 20)


def test_trace_reconstruction_consistency():
    rng = np.random.default_rng(23)
    data, state, hyper = _tiny_problem(rng, 8, 2, 25)
    system = mx.smc_run(data, state.s, state.gamma, state.tau2, hyper, rng)
    ess_over_n, unique = degeneracy_trace(system)
    assert ess_over_n.shape == (8,)
    assert np.all((unique > 0) & (unique <= 1))
    # last entry matches a direct count over the stored forward paths
    assert unique[-1] == pytest.approx(
        np.unique(system.paths, axis=0).shape[0] / 25)


# ------------------------------------------------------------------- cocluster

def test_cocluster_single_sample():
    z = np.array([[0, 0, 1, 1]])
    cc = cocluster(z)
    expected = (z[0][:, None] == z[0][None, :]).astype(float)
    assert np.array_equal(cc.frequency, expected)


def test_cocluster_two_samples_half():
    z = np.array([[0, 0, 1], [0, 1, 1]])
    cc = cocluster(z)
    assert cc.frequency[0, 1] == pytest.approx(0.5)
    assert cc.frequency[1, 2] == pytest.approx(0.5)
    assert cc.frequency[0, 2] == pytest.approx(0.0)


def test_cocluster_symmetry_diag_and_exact_rationals():
    rng = np.random.default_rng(29)
    z = rng.integers(0, 3, size=(7, 10))
    cc = cocluster(z)
    assert np.array_equal(cc.frequency, cc.frequency.T)
    assert np.allclose(np.diag(cc.frequency), 1.0)
    assert np.all((cc.frequency >= 0) & (cc.frequency <= 1))
    # spot-check entries as exact rationals
    for i, j in [(0, 1), (2, 5), (4, 9)]:
        exact = Fraction(int(np.sum(z[:, i] == z[:, j])), 7)
        assert cc.frequency[i, j] == pytest.approx(float(exact), abs=1e-15)
    assert np.allclose(cc.dissimilarity, 1.0 - cc.frequency)


# -------------------------------------------------------- hierarchical_cluster

def test_two_items_single_merge():
    D = np.array([[0.0, 0.3], [0.3, 0.0]])
    tree = hierarchical_cluster(D)
    assert tree.merges == [(0, 1, 0.3)]
    assert np.array_equal(tree.cut(1), [0, 0])
    assert np.array_equal(tree.cut(2), [0, 1])


def test_block_diagonal_cut_recovers_blocks():
    D = np.ones((6, 6))
    blocks = [(0, 1, 2), (3, 4, 5)]
    for block in blocks:
        for i in block:
            for j in block:
                D[i, j] = 0.0
    tree = hierarchical_cluster(D, linkage="average")
    labels = tree.cut(2)
    assert len(set(labels[:3])) == 1
    assert len(set(labels[3:])) == 1
    assert labels[0] != labels[3]


def test_average_linkage_hand_agglomeration():
    # five points; step-by-step averages worked out by hand:
    # merge (0,1)@0.1 -> merge (3,4)@0.2 -> {2} joins {3,4} at
    # mean(0.35, 0.45) = 0.40 -> final at mean of the six cross distances
    D = np.array([
        [0.0, 0.1, 0.9, 0.8, 0.7],
        [0.1, 0.0, 0.6, 0.85, 0.75],
        [0.9, 0.6, 0.0, 0.35, 0.45],
        [0.8, 0.85, 0.35, 0.0, 0.2],
        [0.7, 0.75, 0.45, 0.2, 0.0],
    ])
    tree = hierarchical_cluster(D, linkage="average")
    merges = tree.merges
    assert merges[0] == (0, 1, pytest.approx(0.1))
    assert merges[1] == (3, 4, pytest.approx(0.2))
    assert merges[2] == (2, 6, pytest.approx(0.4))
    final = np.mean([0.9, 0.8, 0.7, 0.6, 0.85, 0.75])
    assert merges[3] == (5, 7, pytest.approx(final))


def test_heights_nondecreasing_all_linkages():
    rng = np.random.default_rng(31)
    base = rng.random((9, 9))
    D = (base + base.T) / 2
    np.fill_diagonal(D, 0.0)
    for linkage in ("average", "single", "complete"):
        tree = hierarchical_cluster(D, linkage=linkage)
        heights = [h for _, _, h in tree.merges]
        assert np.all(np.diff(heights) >= -1e-12)


def test_cut_partitions_exactly():
    rng = np.random.default_rng(37)
    base = rng.random((8, 8))
    D = (base + base.T) / 2
    np.fill_diagonal(D, 0.0)
    tree = hierarchical_cluster(D)
    for K in (1, 2, 3, 8):
        labels = tree.cut(K)
        assert labels.shape == (8,)
        assert set(labels) == set(range(K))


def test_linkage_matrix_layout():
    D = np.array([[0.0, 0.2, 0.9], [0.2, 0.0, 0.8], [0.9, 0.8, 0.0]])
    Z = hierarchical_cluster(D).linkage_matrix()
    assert Z.shape == (2, 4)
    assert Z[0, 3] == 2 and Z[1, 3] == 3


def test_rejects_asymmetric_input():
    with pytest.raises(ValueError):
        hierarchical_cluster(np.array([[0.0, 0.1], [0.4, 0.0]]))


# --------------------------------------------------------- selection_frequency

def test_selection_frequency_constant_chain():
    gamma = np.array([[1, 1, 0], [1, 0, 1]])
    gammas = np.repeat(gamma[None], 6, axis=0)
    zs = np.repeat(np.array([[0, 0, 1, 1]]), 6, axis=0)
    ref = np.array([0, 0, 1, 1])
    table = selection_frequency(gammas, zs, ref, K=2)
    assert np.array_equal(table, gamma)


def test_selection_frequency_alternating_entry():
    g0 = np.array([[1, 0], [1, 1]])
    g1 = np.array([[1, 1], [1, 1]])
    gammas = np.array([g0, g1, g0, g1])
    zs = np.repeat(np.array([[0, 1]]), 4, axis=0)
    table = selection_frequency(gammas, zs, np.array([0, 1]), K=2)
    assert table[0, 1] == pytest.approx(0.5)
    assert table[1, 1] == pytest.approx(1.0)


def test_selection_frequency_unswaps_labels():
    # sample 2 has its labels (and selector rows) swapped; alignment to
    # the reference must undo the swap before pooling
    ref = np.array([0, 0, 1])
    g_a = np.array([[1, 1, 0], [1, 0, 0]])
    zs = np.array([[0, 0, 1], [1, 1, 0]])
    gammas = np.array([g_a, g_a[::-1]])
    table = selection_frequency(gammas, zs, ref, K=2)
    assert np.array_equal(table, g_a)
