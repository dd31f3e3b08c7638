"""Collapsed mixture of lasso regressions with heavy-tailed noise.

Each observation i carries a cluster label z_i in {0, ..., K-1}; given
z_i = k the response is

    y_i | x_i, beta_k, s_i^k  ~  N(x_i' beta_k, s_i^k)

with a per-observation noise variance s_i^k ~ Gamma(d/2, d/2) (mean one)
that fattens the tails of the regression error.  Coefficients carry a
lasso prior expressed as a scale mixture of normals: for the columns
switched on by the binary selector gamma_k,

    beta_k | sigma2_k, tau2_k  ~  N(0, sigma2_k * V_k),
    V_k = diag(1, tau2_k),   tau2_kd ~ Exp(lam^2 / 2),
    sigma2_k ~ InvGamma(a, b),

where the leading 1 in V_k is the always-included intercept column.
Mixture weights follow a symmetric Dirichlet(delta) and are collapsed
into a Dirichlet-multinomial factor over label counts.

Integrating beta_k, sigma2_k out of cluster k's likelihood gives the
closed-form cluster marginal

    xi_k = |Vstar_k|^(1/2) Gamma(astar_k) b^a (bstar_k)^(-astar_k)
           / (|V_k|^(1/2) pi^(n_k/2) Gamma(a))

with, writing X and y for the cluster's rows restricted to included
columns and Sigma = diag(s) over its members,

    Vstar = (V^-1 + X' Sigma^-1 X)^-1
    mstar = Vstar (X' Sigma^-1 y)
    astar = a + n_k / 2
    bstar = b + (y' Sigma^-1 y - mstar' Vstar^-1 mstar) / 2.

The joint unnormalized posterior over (z, s, gamma, tau2) multiplies the
xi_k by the s, tau2 and gamma priors and the Dirichlet-multinomial term;
``log_target`` evaluates its logarithm.  Everything here is a pure
function of its arguments (plus an explicit RNG where noted), working in
natural-log space throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError
from scipy.special import gammaln

from .errors import DataError, DegeneracyError, SingularModelError

_LOG_PI = math.log(math.pi)


@dataclass(frozen=True)
class Hyperparameters:
    """Fixed model constants plus sampler tuning knobs.

    Defaults reproduce the standard synthetic scenario: Dirichlet
    concentration 2, noise-scale prior Gamma(2, 2) (dof = 4), coefficient
    scale prior InvGamma(2, 4), lasso rate lam = 1 (so tau2 ~ Exp(1/2)),
    inclusion probability 1/2, 100 particles and log-normal step lengths
    nu_tau = 2, nu_s = 3.
    """

    K: int
    delta: float = 2.0
    dof: float = 4.0
    a: float = 2.0
    b: float = 4.0
    lam: float = 1.0
    phi: float = 0.5
    N: int = 100
    nu_tau: float = 2.0
    nu_s: float = 3.0
    ess_fraction: float = 0.5

    def __post_init__(self) -> None:
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.delta <= 0:
            raise ValueError("delta must be > 0")
        if self.dof <= 0:
            raise ValueError("dof must be > 0")
        if self.a <= 1:
            raise ValueError("a must be > 1")
        if self.b <= 0:
            raise ValueError("b must be > 0")
        if self.lam <= 0:
            raise ValueError("lam must be > 0")
        if not 0.0 < self.phi < 1.0:
            raise ValueError("phi must lie in (0, 1)")
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.nu_tau < 0 or self.nu_s < 0:
            raise ValueError("step lengths must be >= 0")
        if not 0.0 < self.ess_fraction <= 1.0:
            raise ValueError("ess_fraction must lie in (0, 1]")

    @property
    def tau2_rate(self) -> float:
        """Rate of the exponential prior on the mixing variances tau2."""
        return 0.5 * self.lam ** 2


@dataclass(frozen=True)
class Dataset:
    """Paired observations: response vector and design matrix.

    The first column of ``X`` must be identically one (intercept).
    Optional ground-truth labels and per-cluster inclusion indicators are
    carried along for evaluation only.
    """

    y: np.ndarray
    X: np.ndarray
    z_true: np.ndarray | None = None
    gamma_true: np.ndarray | None = None

    def __post_init__(self) -> None:
        y = np.asarray(self.y, dtype=float)
        X = np.asarray(self.X, dtype=float)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        if y.ndim != 1 or X.ndim != 2:
            raise DataError("y must be 1-D and X 2-D")
        if X.shape[0] != y.shape[0]:
            raise DataError("X and y row counts differ")
        if y.shape[0] < 1 or X.shape[1] < 1:
            raise DataError("need at least one observation and one column")
        if not np.all(np.isfinite(y)) or not np.all(np.isfinite(X)):
            raise DataError("y and X must be finite")
        if not np.all(X[:, 0] == 1.0):
            raise DataError("first column of X must be identically 1")
        if self.z_true is not None:
            zt = np.asarray(self.z_true, dtype=int)
            object.__setattr__(self, "z_true", zt)
            if zt.shape != (y.shape[0],):
                raise DataError("z_true length must equal n")
        if self.gamma_true is not None:
            gt = np.asarray(self.gamma_true, dtype=int)
            object.__setattr__(self, "gamma_true", gt)
            if gt.ndim != 2 or gt.shape[1] != X.shape[1]:
                raise DataError("gamma_true must be K x p")

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass
class LatentState:
    """Current draw of the collapsed posterior's variables.

    z       (n,)    cluster labels in {0, ..., K-1}
    s       (n, K)  per-observation noise variances, all positive
    gamma   (K, p)  binary column selectors, gamma[:, 0] pinned to 1
    tau2    (K, p)  mixing variances, meaningful (and positive) only
                    where gamma == 1 on non-intercept columns; zero
                    elsewhere by convention
    """

    z: np.ndarray
    s: np.ndarray
    gamma: np.ndarray
    tau2: np.ndarray

    def validate(self, data: Dataset, hyper: Hyperparameters) -> None:
        n, p, K = data.n, data.p, hyper.K
        if self.z.shape != (n,):
            raise ValueError("z must have length n")
        if self.z.min() < 0 or self.z.max() >= K:
            raise ValueError("labels must lie in {0, ..., K-1}")
        if self.s.shape != (n, K) or not np.all(self.s > 0):
            raise ValueError("s must be (n, K) and strictly positive")
        if self.gamma.shape != (K, p) or not np.all(self.gamma[:, 0] == 1):
            raise ValueError("gamma must be (K, p) with intercept column on")
        if self.tau2.shape != (K, p):
            raise ValueError("tau2 must be (K, p)")
        sel = (self.gamma[:, 1:] == 1)
        if not np.all(self.tau2[:, 1:][sel] > 0):
            raise ValueError("tau2 must be positive wherever gamma == 1")

    def copy(self) -> "LatentState":
        return LatentState(self.z.copy(), self.s.copy(),
                           self.gamma.copy(), self.tau2.copy())


@dataclass
class ClusterPosteriorStats:
    """Posterior quantities of one cluster's collapsed regression.

    ``m_star``/``v_star`` live on the included columns (intercept first);
    log-determinants are returned directly, never raw determinants.
    """

    n_obs: int
    log_det_v: float
    log_det_vstar: float
    m_star: np.ndarray
    v_star: np.ndarray
    a_star: float
    b_star: float


def cluster_stats(y_k: np.ndarray, X_k: np.ndarray, s_k: np.ndarray,
                  tau2_k: np.ndarray, hyper: Hyperparameters) -> ClusterPosteriorStats:
    """Collapsed posterior statistics for one cluster.

    ``X_k`` holds the cluster's rows restricted to included columns, the
    intercept first; ``tau2_k`` the mixing variances of the non-intercept
    included columns; ``s_k`` the members' noise variances.  An empty
    cluster returns the prior (Vstar = V, mstar = 0, astar = a, bstar = b).
    """
    y_k = np.asarray(y_k, dtype=float)
    X_k = np.asarray(X_k, dtype=float)
    s_k = np.asarray(s_k, dtype=float)
    tau2_k = np.asarray(tau2_k, dtype=float)
    n_k, g = X_k.shape
    if y_k.shape[0] != n_k or s_k.shape[0] != n_k:
        raise ValueError("y_k, X_k, s_k must agree on the member count")
    if tau2_k.shape[0] != g - 1:
        raise ValueError("tau2_k must cover the non-intercept included columns")
    if n_k and not np.all(s_k > 0):
        raise ValueError("noise variances must be strictly positive")
    if g > 1 and not np.all(tau2_k > 0):
        raise ValueError("tau2 entries must be strictly positive")

    v_diag = np.concatenate(([1.0], tau2_k))
    log_det_v = float(np.sum(np.log(v_diag)))

    prec = np.diag(1.0 / v_diag)
    if n_k:
        Xw = X_k / s_k[:, None]
        prec += X_k.T @ Xw
        xty = Xw.T @ y_k
        yty = float(y_k @ (y_k / s_k))
    else:
        xty = np.zeros(g)
        yty = 0.0

    try:
        cf = cho_factor(prec, lower=True)
    except LinAlgError as exc:
        raise SingularModelError(
            f"posterior precision not positive definite (cluster size {n_k})"
        ) from exc
    chol = np.tril(cf[0])
    log_det_vstar = -2.0 * float(np.sum(np.log(np.diag(chol))))
    m_star = cho_solve(cf, xty)
    v_star = cho_solve(cf, np.eye(g))

    b_star = hyper.b + 0.5 * (yty - float(xty @ m_star))
    if not b_star > 0:
        raise DegeneracyError(f"nonpositive posterior scale bstar = {b_star}")
    a_star = hyper.a + 0.5 * n_k
    return ClusterPosteriorStats(n_k, log_det_v, log_det_vstar,
                                 m_star, v_star, a_star, b_star)


def log_xi(stats: ClusterPosteriorStats, hyper: Hyperparameters) -> float:
    """Log of the cluster marginal xi, computed entirely in log space."""
    if not stats.b_star > 0:
        raise DegeneracyError("invalid stats: bstar <= 0")
    return (0.5 * (stats.log_det_vstar - stats.log_det_v)
            + gammaln(stats.a_star) - gammaln(hyper.a)
            + hyper.a * math.log(hyper.b)
            - stats.a_star * math.log(stats.b_star)
            - 0.5 * stats.n_obs * _LOG_PI)


def included_columns(gamma_k: np.ndarray) -> np.ndarray:
    """Indices of the columns switched on in one cluster's selector."""
    return np.flatnonzero(gamma_k)


def log_xi_members(data: Dataset, s: np.ndarray, gamma: np.ndarray,
                   tau2: np.ndarray, k: int, members: np.ndarray,
                   hyper: Hyperparameters) -> float:
    """log xi for cluster k over the given member indices."""
    cols = included_columns(gamma[k])
    members = np.asarray(members, dtype=int)
    X_k = data.X[np.ix_(members, cols)]
    stats = cluster_stats(data.y[members], X_k, s[members, k],
                          tau2[k, cols[1:]], hyper)
    return log_xi(stats, hyper)


def _gamma_logpdf(x: np.ndarray, shape: float, rate: float) -> np.ndarray:
    return (shape * math.log(rate) - gammaln(shape)
            + (shape - 1.0) * np.log(x) - rate * x)


def log_target(state: LatentState, data: Dataset,
               hyper: Hyperparameters) -> float:
    """Log of the unnormalized collapsed posterior at ``state``.

    Sums the per-cluster log xi, the Gamma(d/2, d/2) prior over every
    entry of s, the Exp(lam^2/2) prior over included non-intercept tau2,
    the Bernoulli(phi) prior over the non-intercept selectors and the
    Dirichlet-multinomial label term.
    """
    state.validate(data, hyper)
    K = hyper.K
    half_d = 0.5 * hyper.dof
    total = 0.0
    counts = np.bincount(state.z, minlength=K)
    for k in range(K):
        members = np.flatnonzero(state.z == k)
        total += log_xi_members(data, state.s, state.gamma, state.tau2,
                                k, members, hyper)
        incl = state.gamma[k, 1:] == 1
        tau_in = state.tau2[k, 1:][incl]
        total += float(np.sum(math.log(hyper.tau2_rate) - hyper.tau2_rate * tau_in))
        n_in = int(np.sum(incl))
        n_out = (data.p - 1) - n_in
        total += n_in * math.log(hyper.phi) + n_out * math.log1p(-hyper.phi)
    total += float(np.sum(_gamma_logpdf(state.s, half_d, half_d)))
    total += float(np.sum(gammaln(hyper.delta + counts)))
    total -= float(gammaln(data.n + K * hyper.delta))
    return total


def label_log_masses(i: int, z_prefix: np.ndarray, s: np.ndarray,
                     gamma: np.ndarray, tau2: np.ndarray, data: Dataset,
                     hyper: Hyperparameters) -> np.ndarray:
    """Unnormalized log masses for assigning observation i to each cluster.

    ``z_prefix`` holds the labels of observations 0..i-1.  Component k
    receives mass  [xi_k(members + i) / xi_k(members)] * (delta + n_k),
    divided by the common factor (K*delta + i) so that summing the masses
    gives the one-step normalizer of the sequential target.
    """
    z_prefix = np.asarray(z_prefix, dtype=int)
    if z_prefix.shape[0] != i:
        raise ValueError("z_prefix must cover exactly the prior observations")
    K = hyper.K
    counts = np.bincount(z_prefix, minlength=K)
    out = np.empty(K)
    for k in range(K):
        members = np.flatnonzero(z_prefix == k)
        lx_out = log_xi_members(data, s, gamma, tau2, k, members, hyper)
        lx_in = log_xi_members(data, s, gamma, tau2, k,
                               np.append(members, i), hyper)
        out[k] = (lx_in - lx_out + math.log(hyper.delta + counts[k])
                  - math.log(K * hyper.delta + i))
    return out


def label_conditional(i: int, z_prefix: np.ndarray, s: np.ndarray,
                      gamma: np.ndarray, tau2: np.ndarray, data: Dataset,
                      hyper: Hyperparameters) -> np.ndarray:
    """Normalized label probabilities for observation i given a prefix."""
    lm = label_log_masses(i, z_prefix, s, gamma, tau2, data, hyper)
    top = np.max(lm)
    if not np.isfinite(top):
        raise DegeneracyError(f"all label masses vanished at observation {i}")
    w = np.exp(lm - top)
    return w / w.sum()


def draw_beta_sigma(stats: ClusterPosteriorStats,
                    rng: np.random.Generator) -> tuple[np.ndarray, float]:
    """Draw (beta, sigma2) from the cluster's conjugate posterior.

    sigma2 ~ InvGamma(astar, bstar) and beta | sigma2 ~ N(mstar,
    sigma2 * Vstar); an empty cluster's stats reproduce the prior.
    """
    sigma2 = stats.b_star / rng.gamma(stats.a_star)
    chol = np.linalg.cholesky(stats.v_star)
    beta = stats.m_star + math.sqrt(sigma2) * (chol @ rng.standard_normal(stats.m_star.shape[0]))
    return beta, float(sigma2)
