"""Bayesian mixture of lasso regressions with heavy-tailed errors.

A library and CLI for clustering regression curves with cluster-specific
variable selection, fitted by particle Gibbs (conditional sequential
Monte Carlo plus Metropolis-within-Gibbs), with a synthetic-data study,
clustering/selection diagnostics and a price-series feature pipeline.
"""

from .errors import (DataError, DegeneracyError, MixLassoError,
                     SingularModelError, UsageError)
from .model import (ClusterPosteriorStats, Dataset, Hyperparameters,
                    LatentState, cluster_stats, draw_beta_sigma,
                    label_conditional, label_log_masses, log_target, log_xi,
                    log_xi_members)
from .pgibbs import (AcceptanceCounters, ChainConfig, PosteriorChain,
                     run_chain, update_gamma, update_s, update_tau)
from .simulate import SimSettings, SimulationDraw, generate
from .smc import (ParticleSystem, RetainedPath, csmc_run, ess,
                  resample_multinomial, resample_systematic, sample_retained,
                  smc_run)

__version__ = "0.1.0"

__all__ = [
    "AcceptanceCounters", "ChainConfig", "ClusterPosteriorStats", "DataError",
    "Dataset", "DegeneracyError", "Hyperparameters", "LatentState",
    "MixLassoError", "ParticleSystem", "PosteriorChain", "RetainedPath",
    "SimSettings", "SimulationDraw", "SingularModelError", "UsageError",
    "cluster_stats", "csmc_run", "draw_beta_sigma", "ess", "generate",
    "label_conditional", "label_log_masses", "log_target", "log_xi",
    "log_xi_members", "resample_multinomial", "resample_systematic",
    "run_chain", "sample_retained", "smc_run", "update_gamma", "update_s",
    "update_tau",
]
