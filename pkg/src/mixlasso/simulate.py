"""Synthetic mixture-of-regressions data drawn from the model's priors.

The standard scenario is 50 observations from three clusters with 20
covariates; all generating parameters come from the same priors the
sampler assumes, so the hyperparameter block doubles as the generator
configuration.  Covariates are centered Gaussians whose scale depends on
the cluster membership.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import Dataset, Hyperparameters, LatentState


def default_dispersions(K: int) -> np.ndarray:
    """Geometrically spaced covariate scales, (0.5, 1, 2) for K = 3."""
    if K == 1:
        return np.array([1.0])
    return 2.0 ** np.linspace(-1.0, 1.0, K)


@dataclass(frozen=True)
class SimSettings:
    n: int = 50
    p: int = 20
    K: int = 3
    hyper: Hyperparameters = field(default_factory=lambda: Hyperparameters(K=3))
    covariate_dispersion: tuple[float, ...] | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.n >= self.K >= 1:
            raise ValueError("need n >= K >= 1")
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if self.hyper.K != self.K:
            raise ValueError("hyper.K must match K")
        if self.covariate_dispersion is not None:
            if len(self.covariate_dispersion) != self.K:
                raise ValueError("need one dispersion per cluster")
            if any(d <= 0 for d in self.covariate_dispersion):
                raise ValueError("dispersions must be positive")

    def dispersions(self) -> np.ndarray:
        if self.covariate_dispersion is not None:
            return np.asarray(self.covariate_dispersion, dtype=float)
        return default_dispersions(self.K)


@dataclass
class SimulationDraw:
    """A generated dataset together with everything that produced it."""

    dataset: Dataset
    state: LatentState          # generating latent configuration
    beta: np.ndarray            # (K, p), zero on excluded columns
    sigma2: np.ndarray          # (K,)
    weights: np.ndarray         # (K,)


def generate(settings: SimSettings,
             rng: np.random.Generator | None = None) -> SimulationDraw:
    """Draw one dataset from the generative model.

    Per cluster: inclusion indicators are i.i.d. Bernoulli(phi) with the
    intercept forced on (a cluster whose non-intercept row comes up all
    zero is redrawn, so every regression keeps at least one informative
    column); mixing variances are exponential, sigma2 inverse-gamma and
    the coefficients conditionally normal.  Labels are categorical under
    Dirichlet weights, covariates centered normal with cluster-dependent
    scale, and responses normal with variance s_i drawn from the
    heavy-tail mixing prior.
    """
    if rng is None:
        rng = np.random.default_rng(settings.seed)
    n, p, K = settings.n, settings.p, settings.K
    hyper = settings.hyper
    half_d = 0.5 * hyper.dof
    tau_scale = 1.0 / hyper.tau2_rate

    weights = rng.dirichlet(np.full(K, hyper.delta))

    gamma = np.zeros((K, p), dtype=np.int64)
    for k in range(K):
        while True:
            row = (rng.random(p) < hyper.phi).astype(np.int64)
            row[0] = 1
            if p == 1 or row[1:].any():
                gamma[k] = row
                break

    tau2 = np.zeros((K, p))
    mask = gamma[:, 1:] == 1
    tau2[:, 1:][mask] = rng.exponential(tau_scale, size=int(mask.sum()))

    sigma2 = 1.0 / rng.gamma(hyper.a, 1.0 / hyper.b, size=K)

    beta = np.zeros((K, p))
    for k in range(K):
        incl = gamma[k] == 1
        prior_var = np.concatenate(([1.0], tau2[k, 1:][gamma[k, 1:] == 1]))
        beta[k, incl] = rng.normal(0.0, np.sqrt(sigma2[k] * prior_var))

    z = rng.choice(K, size=n, p=weights)
    disp = settings.dispersions()
    X = np.ones((n, p))
    if p > 1:
        X[:, 1:] = rng.normal(0.0, 1.0, size=(n, p - 1)) * disp[z][:, None]

    s = rng.gamma(half_d, 1.0 / half_d, size=(n, K))
    noise_sd = np.sqrt(s[np.arange(n), z])
    y = np.einsum("ij,ij->i", X, beta[z]) + noise_sd * rng.standard_normal(n)

    dataset = Dataset(y=y, X=X, z_true=z, gamma_true=gamma)
    state = LatentState(z=z.copy(), s=s, gamma=gamma.copy(), tau2=tau2.copy())
    return SimulationDraw(dataset=dataset, state=state, beta=beta,
                          sigma2=sigma2, weights=weights)
