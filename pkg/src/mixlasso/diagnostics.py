"""Clustering and variable-selection diagnostics over posterior samples.

Covers the adjusted Rand index with exhaustive label alignment,
selector sensitivity/specificity, particle-degeneracy traces,
co-clustering frequencies with the induced dissimilarity, agglomerative
clustering of that dissimilarity, and per-cluster selection-frequency
tables.  Everything here consumes post-burn-in, thinned samples and is a
pure function of its inputs.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .smc import ParticleSystem


def adjusted_rand_index(u: np.ndarray, v: np.ndarray) -> float:
    """Chance-corrected agreement of two partitions (1 iff identical).

    Uses the permutation-model adjustment on the pair-count contingency
    table; the expected value under independent random labelings is 0.
    """
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape != v.shape or u.ndim != 1:
        raise ValueError("label vectors must be 1-D and of equal length")
    n = u.shape[0]
    if n < 2:
        raise ValueError("need at least two items")
    _, ui = np.unique(u, return_inverse=True)
    _, vi = np.unique(v, return_inverse=True)
    table = np.zeros((ui.max() + 1, vi.max() + 1), dtype=np.int64)
    np.add.at(table, (ui, vi), 1)

    def comb2(x: np.ndarray) -> np.ndarray:
        return x * (x - 1) // 2

    index = int(comb2(table).sum())
    row_pairs = int(comb2(table.sum(axis=1)).sum())
    col_pairs = int(comb2(table.sum(axis=0)).sum())
    total = math.comb(n, 2)
    expected = row_pairs * col_pairs / total
    maximum = 0.5 * (row_pairs + col_pairs)
    if maximum == expected:
        return 1.0
    return (index - expected) / (maximum - expected)


def align_labels(sample: np.ndarray, reference: np.ndarray, K: int) -> np.ndarray:
    """Permutation of {0..K-1} maximizing pointwise agreement with a reference.

    Exhaustive over the K! relabelings (K <= 8); ties resolve to the
    lexicographically smallest permutation.  ``perm[old_label]`` is the
    new label.
    """
    if K > 8:
        raise ValueError("exhaustive alignment is limited to K <= 8")
    sample = np.asarray(sample)
    reference = np.asarray(reference)
    if sample.shape != reference.shape:
        raise ValueError("label vectors must have equal length")
    best_perm = None
    best_hits = -1
    for perm in itertools.permutations(range(K)):
        hits = int(np.sum(np.asarray(perm)[sample] == reference))
        if hits > best_hits:
            best_hits = hits
            best_perm = perm
    return np.asarray(best_perm, dtype=np.int64)


def relabel(sample: np.ndarray, perm: np.ndarray) -> np.ndarray:
    """Apply an alignment permutation to a label vector."""
    return np.asarray(perm)[np.asarray(sample)]


def order_by_mean_response(z: np.ndarray, y: np.ndarray, K: int) -> np.ndarray:
    """Alignment permutation ranking clusters by their mean response.

    Cluster with the largest mean response gets label 0; empty clusters
    sort last.  Used to relabel real-data runs where no reference
    partition exists.
    """
    z = np.asarray(z)
    means = np.full(K, -np.inf)
    for k in range(K):
        sel = z == k
        if sel.any():
            means[k] = float(np.mean(y[sel]))
    order = np.argsort(-means, kind="stable")
    perm = np.empty(K, dtype=np.int64)
    perm[order] = np.arange(K)
    return perm


def gamma_accuracy(estimated: np.ndarray, truth: np.ndarray
                   ) -> tuple[float | None, float | None]:
    """(sensitivity, specificity) of aligned selectors, pooled over clusters.

    The intercept column is excluded from the tally.  A truth with no
    active column has undefined sensitivity (returned as None); a truth
    with no inactive column likewise has undefined specificity.
    """
    est = np.asarray(estimated)[:, 1:]
    tru = np.asarray(truth)[:, 1:]
    if est.shape != tru.shape:
        raise ValueError("selector matrices must share their shape")
    tp = int(np.sum((est == 1) & (tru == 1)))
    fn = int(np.sum((est == 0) & (tru == 1)))
    tn = int(np.sum((est == 0) & (tru == 0)))
    fp = int(np.sum((est == 1) & (tru == 0)))
    sensitivity = tp / (tp + fn) if (tp + fn) else None
    specificity = tn / (tn + fp) if (tn + fp) else None
    return sensitivity, specificity


def degeneracy_trace(system: ParticleSystem) -> tuple[np.ndarray, np.ndarray]:
    """Per-observation ESS/N and distinct-path fraction of one sweep.

    The path fraction counts distinct label paths among the live
    particles after each observation is processed, reconstructed from
    the recorded genealogy.
    """
    n, N = system.labels_hist.shape
    ess_over_n = np.asarray(system.ess_series, dtype=float) / N
    unique = np.empty(n)
    paths = np.empty((N, n), dtype=np.int64)
    length = 0
    for i in range(n):
        if i > 0:
            paths[:, :length] = paths[system.ancestors[i], :length]
        paths[:, length] = system.labels_hist[i]
        length += 1
        unique[i] = np.unique(paths[:, :length], axis=0).shape[0] / N
    return ess_over_n, unique


@dataclass
class CoClusterMatrix:
    """Pairwise same-cluster frequencies over a chain of label vectors."""

    frequency: np.ndarray   # (n, n), symmetric, unit diagonal

    @property
    def dissimilarity(self) -> np.ndarray:
        return 1.0 - self.frequency


def cocluster(samples: np.ndarray) -> CoClusterMatrix:
    """Fraction of samples assigning each pair to one cluster."""
    z = np.atleast_2d(np.asarray(samples))
    if z.shape[0] < 1:
        raise ValueError("need at least one sample")
    n = z.shape[1]
    freq = np.zeros((n, n))
    for row in z:
        freq += row[:, None] == row[None, :]
    freq /= z.shape[0]
    return CoClusterMatrix(frequency=freq)


@dataclass
class MergeTree:
    """Agglomerative merge sequence over n leaves.

    ``merges[i] = (a, b, height)`` joins nodes a and b into node
    n_leaves + i; ids below n_leaves are leaves.  For the supported
    linkages the heights are nondecreasing.
    """

    n_leaves: int
    merges: list[tuple[int, int, float]]

    def cut(self, K: int) -> np.ndarray:
        """Hard partition into K clusters, labels 0..K-1 by first member."""
        if not 1 <= K <= self.n_leaves:
            raise ValueError("K must lie in [1, n_leaves]")
        parent = list(range(self.n_leaves + len(self.merges)))

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for idx in range(self.n_leaves - K):
            a, b, _ = self.merges[idx]
            node = self.n_leaves + idx
            parent[find(a)] = node
            parent[find(b)] = node
        roots: dict[int, int] = {}
        labels = np.empty(self.n_leaves, dtype=np.int64)
        for leaf in range(self.n_leaves):
            r = find(leaf)
            if r not in roots:
                roots[r] = len(roots)
            labels[leaf] = roots[r]
        return labels

    def linkage_matrix(self) -> np.ndarray:
        """Merges in the (a, b, height, count) layout plotting tools expect."""
        sizes = {i: 1 for i in range(self.n_leaves)}
        out = np.empty((len(self.merges), 4))
        for idx, (a, b, h) in enumerate(self.merges):
            count = sizes[a] + sizes[b]
            sizes[self.n_leaves + idx] = count
            out[idx] = (a, b, h, count)
        return out


_LINKAGES = ("average", "single", "complete")


def hierarchical_cluster(dissimilarity: np.ndarray,
                         linkage: str = "average") -> MergeTree:
    """Agglomerate a dissimilarity matrix bottom-up.

    At each step the two closest clusters merge at their current
    distance; between-cluster distances follow the chosen linkage
    (average weighted by cluster sizes, or single/complete extremes).
    """
    if linkage not in _LINKAGES:
        raise ValueError(f"linkage must be one of {_LINKAGES}")
    D = np.asarray(dissimilarity, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ValueError("dissimilarity must be square")
    if not np.allclose(D, D.T):
        raise ValueError("dissimilarity must be symmetric")
    n = D.shape[0]
    dist = {}
    active = list(range(n))
    sizes = {i: 1 for i in range(n)}
    for i in range(n):
        for j in range(i + 1, n):
            dist[(i, j)] = D[i, j]

    def get(a: int, b: int) -> float:
        return dist[(a, b) if a < b else (b, a)]

    merges: list[tuple[int, int, float]] = []
    next_id = n
    while len(active) > 1:
        best = None
        best_d = np.inf
        for ai in range(len(active)):
            for bi in range(ai + 1, len(active)):
                d = get(active[ai], active[bi])
                if d < best_d:
                    best_d = d
                    best = (active[ai], active[bi])
        a, b = best
        merges.append((a, b, best_d))
        for c in active:
            if c in (a, b):
                continue
            da, db = get(a, c), get(b, c)
            if linkage == "single":
                d_new = min(da, db)
            elif linkage == "complete":
                d_new = max(da, db)
            else:
                d_new = (sizes[a] * da + sizes[b] * db) / (sizes[a] + sizes[b])
            dist[(c, next_id) if c < next_id else (next_id, c)] = d_new
        sizes[next_id] = sizes[a] + sizes[b]
        active = [c for c in active if c not in (a, b)] + [next_id]
        next_id += 1
    return MergeTree(n_leaves=n, merges=merges)


def pool_selectors(gamma_samples: np.ndarray,
                   perms: list[np.ndarray]) -> np.ndarray:
    """Average selector rows after applying one permutation per sample."""
    gamma_samples = np.asarray(gamma_samples)
    if gamma_samples.shape[0] != len(perms) or not len(perms):
        raise ValueError("need one permutation per sample")
    acc = np.zeros(gamma_samples.shape[1:], dtype=float)
    for g, perm in zip(gamma_samples, perms):
        aligned = np.empty_like(g)
        aligned[np.asarray(perm)] = g
        acc += aligned
    return acc / gamma_samples.shape[0]


def selection_frequency(gamma_samples: np.ndarray, z_samples: np.ndarray,
                        reference: np.ndarray, K: int) -> np.ndarray:
    """Mean inclusion indicator per cluster and column, after alignment.

    Each sample's labels are aligned to the reference partition and the
    same permutation reorders its selector rows before pooling.
    """
    gamma_samples = np.asarray(gamma_samples)
    z_samples = np.asarray(z_samples)
    if gamma_samples.shape[0] != z_samples.shape[0] or gamma_samples.shape[0] == 0:
        raise ValueError("need matching, nonempty sample stacks")
    perms = [align_labels(z, reference, K) for z in z_samples]
    return pool_selectors(gamma_samples, perms)
