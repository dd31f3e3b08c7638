"""Sequential Monte Carlo over cluster labels, plain and conditional.

The sweep targets the sequence of conditionals over label prefixes
z_{0:i} for fixed (s, gamma, tau2).  Proposals are the exact one-step
label conditionals, so the incremental weight of a particle is the
normalizer of its conditional; running weights accumulate
multiplicatively between resampling epochs and reset to one at each
epoch.  Resampling is adaptive: it fires only while the effective sample
size of the running weights sits strictly below ``ess_fraction * N``.

``log_evidence`` estimates the normalizing constant of the label target
(relative to the empty configuration, i.e. with the Dirichlet-multinomial
factor expressed through rising factorials): the exact first-step
normalizer times the product over epochs of mean running weights.  Under
multinomial resampling this estimator is unbiased.

The conditional variant pins one prespecified path: at every step the
slot given by the retained lineage keeps the retained label and ancestor,
while its weight updates like any other particle's.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .engine import ClusterEvaluator
from .errors import DegeneracyError
from .model import Dataset, Hyperparameters


@dataclass
class ParticleSystem:
    """A completed particle sweep with full genealogy.

    ``paths`` stores the forward-propagated label paths; ``labels_hist``
    and ``ancestors`` record, per step, what each slot drew and which
    slot it extended (row 0 of ``ancestors`` is the identity).  The two
    bookkeeping schemes are redundant by construction and cross-checked
    in the tests.
    """

    n_particles: int
    paths: np.ndarray            # (N, n) final label paths
    log_weights: np.ndarray      # (N,) running log weights of the last epoch
    labels_hist: np.ndarray      # (n, N)
    ancestors: np.ndarray        # (n, N)
    log_evidence: float
    resample_epochs: list[int] = field(default_factory=list)
    ess_series: np.ndarray | None = None   # (n,) ESS after each step

    @property
    def weights(self) -> np.ndarray:
        """Unnormalized nonnegative running weights (scaled to max 1)."""
        return np.exp(self.log_weights - np.max(self.log_weights))

    def normalized_weights(self) -> np.ndarray:
        w = self.weights
        return w / w.sum()


@dataclass(frozen=True)
class RetainedPath:
    """One particle's labels together with its ancestral lineage."""

    labels: np.ndarray   # (n,)
    lineage: np.ndarray  # (n,) slot indices b_i, lineage[-1] = selected index

    def __post_init__(self) -> None:
        if self.labels.shape != self.lineage.shape:
            raise ValueError("labels and lineage must have equal length")


def ess(weights: np.ndarray) -> float:
    """Effective sample size of nonnegative weights, in [1, N]."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("weights must be a nonempty vector")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    total = w.sum()
    if total <= 0:
        raise DegeneracyError("all weights are zero")
    wn = w / total
    return float(1.0 / np.sum(wn ** 2))


def _log_ess(log_w: np.ndarray) -> float:
    w = np.exp(log_w - np.max(log_w))
    return float(np.sum(w) ** 2 / np.sum(w ** 2))


def resample_multinomial(weights: np.ndarray,
                         rng: np.random.Generator) -> np.ndarray:
    """I.i.d. ancestor indices from the normalized-weight categorical."""
    w = np.asarray(weights, dtype=float)
    total = w.sum()
    if total <= 0:
        raise DegeneracyError("all weights are zero")
    cdf = np.cumsum(w / total)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, rng.random(w.shape[0]), side="right")


def resample_systematic(weights: np.ndarray,
                        rng: np.random.Generator) -> np.ndarray:
    """Systematic (single-uniform stratified) ancestor indices."""
    w = np.asarray(weights, dtype=float)
    total = w.sum()
    if total <= 0:
        raise DegeneracyError("all weights are zero")
    n = w.shape[0]
    points = (rng.random() + np.arange(n)) / n
    cdf = np.cumsum(w / total)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, points, side="right")


_RESAMPLERS = {"multinomial": resample_multinomial,
               "systematic": resample_systematic}


def _run(data: Dataset, s: np.ndarray, gamma: np.ndarray, tau2: np.ndarray,
         hyper: Hyperparameters, rng: np.random.Generator,
         retained: RetainedPath | None,
         resampling: str, scheme: str) -> ParticleSystem:
    if resampling not in ("adaptive", "always", "never"):
        raise ValueError(f"unknown resampling mode {resampling!r}")
    if scheme not in _RESAMPLERS:
        raise ValueError(f"unknown resampling scheme {scheme!r}")
    draw_ancestors = _RESAMPLERS[scheme]

    n, K, N = data.n, hyper.K, hyper.N
    if retained is not None and retained.labels.shape[0] != n:
        raise ValueError("retained path length must equal n")

    ev = ClusterEvaluator(data, s, gamma, tau2, hyper)

    paths = np.zeros((N, n), dtype=np.int64)
    counts = np.zeros((N, K), dtype=np.int64)
    logxi_cur = np.zeros((N, K))
    log_w = np.zeros(N)
    ancestors = np.empty((n, N), dtype=np.int64)
    ancestors[0] = np.arange(N)
    labels_hist = np.empty((n, N), dtype=np.int64)
    log_evidence = 0.0
    resample_epochs: list[int] = []
    ess_series = np.empty(n)
    incl = np.empty((N, K))
    incl_col = np.empty(N)

    for i in range(n):
        if i > 0:
            fire = False
            if resampling == "always":
                fire = True
            elif resampling == "adaptive":
                fire = _log_ess(log_w) < hyper.ess_fraction * N
            if fire:
                log_evidence += logsumexp(log_w) - np.log(N)
                anc = draw_ancestors(np.exp(log_w - log_w.max()), rng)
                log_w = np.zeros(N)
            else:
                anc = np.arange(N)
            if retained is not None:
                anc[retained.lineage[i]] = retained.lineage[i - 1]
                if not fire:
                    log_w = log_w[anc]
            if fire:
                resample_epochs.append(i)
            paths = paths[anc]
            counts = counts[anc]
            logxi_cur = logxi_cur[anc]
            ancestors[i] = anc

        for k in range(K):
            ev.batch_incl_logxi(paths, i, k, incl_col)
            incl[:, k] = incl_col
        log_m = (incl - logxi_cur
                 + np.log(hyper.delta + counts)
                 - np.log(K * hyper.delta + i))
        if np.any(np.isnan(log_m)):
            raise DegeneracyError(f"degenerate label masses at observation {i}")
        u = logsumexp(log_m, axis=1)
        if not np.all(np.isfinite(u)):
            raise DegeneracyError(
                f"all incremental weights vanished at observation {i}")

        probs = np.exp(log_m - u[:, None])
        cdf = np.cumsum(probs, axis=1)
        z = np.minimum((cdf < rng.random(N)[:, None]).sum(axis=1), K - 1)
        if retained is not None:
            z[retained.lineage[i]] = retained.labels[i]

        paths[:, i] = z
        labels_hist[i] = z
        if i == 0:
            log_evidence += u[0]
        else:
            log_w = log_w + u
        rows = np.arange(N)
        logxi_cur[rows, z] = incl[rows, z]
        counts[rows, z] += 1
        ess_series[i] = _log_ess(log_w)

    log_evidence += logsumexp(log_w) - np.log(N)
    return ParticleSystem(N, paths, log_w, labels_hist, ancestors,
                          float(log_evidence), resample_epochs, ess_series)


def smc_run(data: Dataset, s: np.ndarray, gamma: np.ndarray,
            tau2: np.ndarray, hyper: Hyperparameters,
            rng: np.random.Generator, resampling: str = "adaptive",
            scheme: str = "multinomial") -> ParticleSystem:
    """Run one particle sweep over the labels for fixed (s, gamma, tau2)."""
    return _run(data, s, gamma, tau2, hyper, rng, None, resampling, scheme)


def csmc_run(data: Dataset, s: np.ndarray, gamma: np.ndarray,
             tau2: np.ndarray, hyper: Hyperparameters,
             retained: RetainedPath, rng: np.random.Generator,
             resampling: str = "adaptive",
             scheme: str = "multinomial") -> ParticleSystem:
    """Conditional sweep: the retained path survives at its lineage slots."""
    return _run(data, s, gamma, tau2, hyper, rng, retained, resampling, scheme)


def sample_retained(system: ParticleSystem,
                    rng: np.random.Generator) -> RetainedPath:
    """Select one particle by its final weight; rebuild labels by lineage."""
    probs = system.normalized_weights()
    t = int(rng.choice(system.n_particles, p=probs))
    n = system.labels_hist.shape[0]
    lineage = np.empty(n, dtype=np.int64)
    lineage[n - 1] = t
    for i in range(n - 2, -1, -1):
        lineage[i] = system.ancestors[i + 1][lineage[i + 1]]
    labels = system.labels_hist[np.arange(n), lineage]
    return RetainedPath(labels=labels, lineage=lineage)
