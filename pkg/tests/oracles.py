"""Independent reference computations backing the test suite.

Everything here is deliberately naive: direct Monte Carlo integration of
the unmarginalized model, dense linear algebra via explicit inverses,
exhaustive enumeration over label vectors and selector models, and
tensor-product quadrature for the mixing variables.  These references are
built and validated before the implementations they check.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.special import gammaln, logsumexp, roots_genlaguerre
from scipy.stats import expon, gamma as gamma_dist

from mixlasso.engine import _logxi_rows
from mixlasso.model import Dataset, Hyperparameters, included_columns


# ---------------------------------------------------------------------------
# Monte Carlo integration of the unmarginalized conjugate model.
#
# The closed-form cluster marginal is the integral of
#     prod_i N(y_i; x_i' beta, sigma2 s_i) * N(beta; 0, sigma2 V) * IGa(sigma2)
# over (beta, sigma2), multiplied by the exact base factor
# 2^(n_k/2) * prod_i s_i^(1/2): the formula keeps pi^(n_k/2) in place of
# the Gaussian normalizer (2 pi)^(n_k/2) |diag(s)|^(1/2).
# ---------------------------------------------------------------------------

def mc_log_xi(y_k, X_k, s_k, tau2_k, hyper: Hyperparameters,
              rng: np.random.Generator, draws: int = 400_000
              ) -> tuple[float, float]:
    """Monte Carlo estimate of log xi and the standard error of the log."""
    y_k = np.asarray(y_k, dtype=float)
    X_k = np.asarray(X_k, dtype=float)
    s_k = np.asarray(s_k, dtype=float)
    n_k, g = X_k.shape
    v_diag = np.concatenate(([1.0], np.asarray(tau2_k, dtype=float)))

    sigma2 = hyper.b / rng.gamma(hyper.a, size=draws)
    beta = rng.standard_normal((draws, g)) * np.sqrt(sigma2[:, None] * v_diag)
    mean = beta @ X_k.T
    var = sigma2[:, None] * s_k[None, :]
    loglik = -0.5 * np.sum(np.log(2.0 * np.pi * var)
                           + (y_k[None, :] - mean) ** 2 / var, axis=1)
    log_mean = logsumexp(loglik) - math.log(draws)
    w = np.exp(loglik - log_mean)
    se_log = float(np.std(w) / math.sqrt(draws))
    bridge = 0.5 * n_k * math.log(2.0) + 0.5 * float(np.sum(np.log(s_k)))
    return float(log_mean + bridge), se_log


def dense_cluster_stats(y_k, X_k, s_k, tau2_k, hyper: Hyperparameters):
    """Collapsed-posterior quantities via explicit dense inverses."""
    y_k = np.asarray(y_k, dtype=float)
    X_k = np.asarray(X_k, dtype=float)
    s_k = np.asarray(s_k, dtype=float)
    v = np.diag(np.concatenate(([1.0], np.asarray(tau2_k, dtype=float))))
    sig_inv = np.diag(1.0 / s_k) if s_k.size else np.zeros((0, 0))
    prec = np.linalg.inv(v) + X_k.T @ sig_inv @ X_k
    v_star = np.linalg.inv(prec)
    m_star = v_star @ (X_k.T @ sig_inv @ y_k)
    a_star = hyper.a + 0.5 * y_k.shape[0]
    b_star = hyper.b + 0.5 * (y_k @ sig_inv @ y_k - m_star @ prec @ m_star)
    return v_star, m_star, a_star, b_star, v


def dense_log_xi(y_k, X_k, s_k, tau2_k, hyper: Hyperparameters) -> float:
    v_star, _, a_star, b_star, v = dense_cluster_stats(y_k, X_k, s_k, tau2_k, hyper)
    n_k = np.asarray(y_k).shape[0]
    return float(0.5 * (np.linalg.slogdet(v_star)[1] - np.linalg.slogdet(v)[1])
                 + gammaln(a_star) - gammaln(hyper.a)
                 + hyper.a * math.log(hyper.b) - a_star * math.log(b_star)
                 - 0.5 * n_k * math.log(math.pi))


# ---------------------------------------------------------------------------
# Exhaustive enumeration of the label target for fixed (s, gamma, tau2).
# ---------------------------------------------------------------------------

def log_rising(x: float, m: int) -> float:
    return float(gammaln(x + m) - gammaln(x))


def log_label_joint(z, data: Dataset, s, gamma, tau2,
                    hyper: Hyperparameters) -> float:
    """log of the unnormalized label target, relative to the empty path.

    Product over clusters of xi_k times rising(delta, n_k), divided by
    rising(K delta, n); matches what the particle sweep's incremental
    weights telescope to.
    """
    z = np.asarray(z, dtype=int)
    total = -log_rising(hyper.K * hyper.delta, z.shape[0])
    for k in range(hyper.K):
        members = np.flatnonzero(z == k)
        total += log_rising(hyper.delta, members.shape[0])
        total += _cluster_logxi(data, s, gamma, tau2, k, members, hyper)
    return total


def _cluster_logxi(data, s, gamma, tau2, k, members, hyper) -> float:
    cols = included_columns(np.asarray(gamma)[k])
    Xc = np.ascontiguousarray(data.X[:, cols])
    rows = np.ascontiguousarray(members, dtype=np.int64)
    val = _logxi_rows(np.ascontiguousarray(data.y), Xc,
                      np.ascontiguousarray(np.asarray(s)[:, k]), rows,
                      rows.shape[0], -1,
                      np.ascontiguousarray(np.asarray(tau2)[k, cols[1:]]),
                      hyper.a, hyper.b, math.lgamma(hyper.a))
    if math.isnan(val):
        raise ValueError("degenerate cluster marginal in oracle")
    return val


def enum_label_posterior(data: Dataset, s, gamma, tau2,
                         hyper: Hyperparameters
                         ) -> tuple[list[tuple[int, ...]], np.ndarray, float]:
    """All K^n label vectors with their posterior probabilities.

    Returns (configs, probabilities, log normalizer); the normalizer is
    the exact target of the sweep's evidence estimate.
    """
    configs = list(itertools.product(range(hyper.K), repeat=data.n))
    logs = np.array([log_label_joint(z, data, s, gamma, tau2, hyper)
                     for z in configs])
    log_norm = float(logsumexp(logs))
    return configs, np.exp(logs - log_norm), log_norm


# ---------------------------------------------------------------------------
# Tensor quadrature over the mixing variables (s per member, tau2 per
# included column).  Double-exponential nodes handle the noise variances;
# the exponential tau2 prior is exactly a Laguerre weight.
# ---------------------------------------------------------------------------

def expsinh_rule(m: int, T: float = 3.0) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and log-weights for integrating f(s) ds over (0, inf)."""
    t = np.linspace(-T, T, m)
    step = t[1] - t[0]
    c = 0.5 * math.pi
    s = np.exp(c * np.sinh(t))
    logw = math.log(step) + np.log(c * np.cosh(t)) + np.log(s)
    return s, logw


def cluster_prior_integral(data: Dataset, members, cols,
                           hyper: Hyperparameters,
                           m_s: int = 24, m_t: int = 16) -> float:
    """log E[xi] under the priors of the members' s and the included tau2.

    Exp-sinh quadrature per member variance, generalized Gauss-Laguerre
    per mixing variance; exact (log 1 = 0) for an empty cluster with no
    free columns.
    """
    members = np.asarray(members, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    n_m = members.shape[0]
    n_t = cols.shape[0] - 1
    half_d = 0.5 * hyper.dof

    s_nodes, s_logw = expsinh_rule(m_s)
    s_logw = s_logw + gamma_dist.logpdf(s_nodes, half_d, scale=1.0 / half_d)
    t_nodes, t_w = roots_genlaguerre(m_t, 0.0)
    t_logw = np.log(t_w)
    t_nodes = t_nodes / hyper.tau2_rate

    y = np.ascontiguousarray(data.y)
    Xc = np.ascontiguousarray(data.X[:, cols])
    lgam_a = math.lgamma(hyper.a)
    s_col = np.zeros(data.n)
    tau2c = np.zeros(n_t)

    total: list[float] = []
    s_grids = [range(m_s)] * n_m
    t_grids = [range(m_t)] * n_t
    for s_idx in itertools.product(*s_grids):
        logw_s = 0.0
        for pos, j in enumerate(s_idx):
            s_col[members[pos]] = s_nodes[j]
            logw_s += s_logw[j]
        for t_idx in itertools.product(*t_grids):
            logw = logw_s
            for pos, j in enumerate(t_idx):
                tau2c[pos] = t_nodes[j]
                logw += t_logw[j]
            val = _logxi_rows(y, Xc, s_col, members, n_m, -1, tau2c,
                              hyper.a, hyper.b, lgam_a)
            if math.isnan(val):
                raise ValueError("degenerate cluster marginal in oracle")
            total.append(val + logw)
    return float(logsumexp(total))


def mc_cluster_prior_integral(data: Dataset, members, cols,
                              hyper: Hyperparameters,
                              rng: np.random.Generator,
                              draws: int = 200_000) -> tuple[float, float]:
    """Monte Carlo counterpart of :func:`cluster_prior_integral`."""
    members = np.asarray(members, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    half_d = 0.5 * hyper.dof
    y = np.ascontiguousarray(data.y)
    Xc = np.ascontiguousarray(data.X[:, cols])
    lgam_a = math.lgamma(hyper.a)
    n_m, n_t = members.shape[0], cols.shape[0] - 1
    vals = np.empty(draws)
    s_col = np.zeros(data.n)
    for j in range(draws):
        s_col[members] = rng.gamma(half_d, 1.0 / half_d, size=n_m)
        tau2c = rng.exponential(1.0 / hyper.tau2_rate, size=n_t)
        vals[j] = _logxi_rows(y, Xc, s_col, members, n_m, -1, tau2c,
                              hyper.a, hyper.b, lgam_a)
    log_mean = float(logsumexp(vals) - math.log(draws))
    w = np.exp(vals - log_mean)
    return log_mean, float(np.std(w) / math.sqrt(draws))


# ---------------------------------------------------------------------------
# Fully marginal enumeration: labels x selector models, mixing variables
# integrated out by quadrature.
# ---------------------------------------------------------------------------

def _selector_rows(p: int) -> list[np.ndarray]:
    rows = []
    for bits in itertools.product((0, 1), repeat=p - 1):
        rows.append(np.array((1,) + bits, dtype=np.int64))
    return rows


def enum_marginal_label_posterior(data: Dataset, hyper: Hyperparameters,
                                  m_s: int = 24, m_t: int = 16
                                  ) -> tuple[list[tuple[int, ...]], np.ndarray]:
    """Posterior over label vectors with gamma, s, tau2 all removed.

    Enumerates every label vector and selector row, exploiting that the
    prior integral factorizes over clusters; feasible for n <= 5 and
    small p.
    """
    K, n, p = hyper.K, data.n, data.p
    rows = _selector_rows(p)
    log_phi = math.log(hyper.phi)
    log_1mphi = math.log1p(-hyper.phi)
    row_prior = np.array([int(r[1:].sum()) * log_phi
                          + int((p - 1) - r[1:].sum()) * log_1mphi
                          for r in rows])

    cache: dict[tuple[frozenset, int], float] = {}

    def integral(members: np.ndarray, row_idx: int) -> float:
        key = (frozenset(members.tolist()), row_idx)
        if key not in cache:
            cols = included_columns(rows[row_idx])
            cache[key] = cluster_prior_integral(data, members, cols, hyper,
                                                m_s=m_s, m_t=m_t)
        return cache[key]

    configs = list(itertools.product(range(K), repeat=n))
    logs = np.empty(len(configs))
    for c_idx, z in enumerate(configs):
        z_arr = np.asarray(z, dtype=int)
        total = -log_rising(K * hyper.delta, n)
        for k in range(K):
            members = np.flatnonzero(z_arr == k)
            total += log_rising(hyper.delta, members.shape[0])
            per_row = [integral(members, r) + row_prior[r]
                       for r in range(len(rows))]
            total += float(logsumexp(per_row))
        logs[c_idx] = total
    return configs, np.exp(logs - logsumexp(logs))


def enum_selector_posterior(data: Dataset, z, s, hyper: Hyperparameters,
                            k: int = 0, m_t: int = 16
                            ) -> tuple[list[tuple[int, ...]], np.ndarray]:
    """Posterior over one cluster's selector rows for frozen labels and s.

    tau2 is integrated against its prior per included column; the
    inclusion prior weighs each model.
    """
    z = np.asarray(z, dtype=int)
    members = np.flatnonzero(z == k)
    rows = _selector_rows(data.p)
    log_phi = math.log(hyper.phi)
    log_1mphi = math.log1p(-hyper.phi)

    t_nodes, t_w = roots_genlaguerre(m_t, 0.0)
    t_logw = np.log(t_w)
    t_nodes = t_nodes / hyper.tau2_rate
    y = np.ascontiguousarray(data.y)
    lgam_a = math.lgamma(hyper.a)
    s_col = np.ascontiguousarray(np.asarray(s)[:, k])

    logs = np.empty(len(rows))
    for r_idx, row in enumerate(rows):
        cols = included_columns(row)
        Xc = np.ascontiguousarray(data.X[:, cols])
        n_t = cols.shape[0] - 1
        vals = []
        tau2c = np.zeros(n_t)
        for t_idx in itertools.product(*([range(len(t_nodes))] * n_t)):
            logw = 0.0
            for pos, j in enumerate(t_idx):
                tau2c[pos] = t_nodes[j]
                logw += t_logw[j]
            lx = _logxi_rows(y, Xc, s_col, members, members.shape[0], -1,
                             tau2c, hyper.a, hyper.b, lgam_a)
            vals.append(lx + logw)
        n_in = int(row[1:].sum())
        logs[r_idx] = (logsumexp(vals) + n_in * log_phi
                       + ((data.p - 1) - n_in) * log_1mphi)
    return [tuple(r) for r in rows], np.exp(logs - logsumexp(logs))


# ---------------------------------------------------------------------------
# Chain Monte Carlo error helpers.
# ---------------------------------------------------------------------------

def batch_means_se(x: np.ndarray, n_batches: int = 50) -> float:
    """Standard error of the mean of a correlated series via batch means."""
    x = np.asarray(x, dtype=float)
    usable = (x.shape[0] // n_batches) * n_batches
    if usable < n_batches:
        raise ValueError("series too short for the requested batches")
    batches = x[:usable].reshape(n_batches, -1).mean(axis=1)
    return float(np.std(batches, ddof=1) / math.sqrt(n_batches))


def canonical_partition(z) -> tuple[int, ...]:
    """Relabel a label vector by order of first appearance."""
    mapping: dict[int, int] = {}
    out = []
    for label in z:
        if label not in mapping:
            mapping[label] = len(mapping)
        out.append(mapping[label])
    return tuple(out)
