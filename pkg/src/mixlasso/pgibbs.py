"""Two-stage particle Gibbs sampler for the collapsed posterior.

Stage I draws (s, gamma, tau2) from their priors, runs an unconditional
particle sweep over the labels and selects a retained path.  Stage II
alternates a conditional sweep (which regenerates the labels while the
retained path survives), reselection of the retained path, and
Metropolis-within-Gibbs refreshes of s, gamma and tau2 given the retained
labels - in that order.

All three parameter updates use multiplicative log-normal proposals (or,
for the selectors, single-column birth/death flips whose proposal density
cancels against the mixing-variance prior), so each acceptance ratio is
the cluster-marginal ratio times a prior-with-Jacobian correction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .engine import ClusterEvaluator, eval_logxi
from .errors import DataError
from .model import Dataset, Hyperparameters, LatentState, included_columns, log_target
from .smc import ParticleSystem, csmc_run, sample_retained, smc_run


@dataclass(frozen=True)
class ChainConfig:
    """Iteration budget and bookkeeping for one chain."""

    iterations: int
    burn_in: int = 0
    thinning: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("burn_in must lie in [0, iterations)")
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")


@dataclass
class AcceptanceCounters:
    tau_proposed: int = 0
    tau_accepted: int = 0
    s_proposed: int = 0
    s_accepted: int = 0
    gamma_proposed: int = 0
    gamma_accepted: int = 0

    def merge(self, other: "AcceptanceCounters") -> None:
        self.tau_proposed += other.tau_proposed
        self.tau_accepted += other.tau_accepted
        self.s_proposed += other.s_proposed
        self.s_accepted += other.s_accepted
        self.gamma_proposed += other.gamma_proposed
        self.gamma_accepted += other.gamma_accepted

    @staticmethod
    def _rate(accepted: int, proposed: int) -> float:
        return accepted / proposed if proposed else 0.0

    @property
    def tau_rate(self) -> float:
        return self._rate(self.tau_accepted, self.tau_proposed)

    @property
    def s_rate(self) -> float:
        return self._rate(self.s_accepted, self.s_proposed)

    @property
    def gamma_rate(self) -> float:
        return self._rate(self.gamma_accepted, self.gamma_proposed)


@dataclass
class IterationRecord:
    """One row of the chain trace."""

    iteration: int
    ess_min: float            # min over observations of ESS / N
    ess_final: float          # ESS / N after the last observation
    unique_paths: float       # distinct label paths / N at sweep end
    resample_count: int
    log_target: float
    acc_tau: float            # cumulative acceptance rates
    acc_s: float
    acc_gamma: float


@dataclass
class PosteriorChain:
    """Stored post-burn-in samples plus the full per-iteration trace."""

    samples: list[LatentState]
    trace: list[IterationRecord]
    counters: AcceptanceCounters
    config: ChainConfig

    @property
    def z_samples(self) -> np.ndarray:
        return np.array([st.z for st in self.samples])

    @property
    def gamma_samples(self) -> np.ndarray:
        return np.array([st.gamma for st in self.samples])

    @property
    def tau2_samples(self) -> np.ndarray:
        return np.array([st.tau2 for st in self.samples])


def _log_move_ratio(x_new: float, x_old: float, shape: float, rate: float) -> float:
    """log of [GammaPdf(x_new) x_new] / [GammaPdf(x_old) x_old].

    The trailing x factors are the change-of-variables terms of the
    multiplicative log-normal proposal; combined with the Gamma(shape,
    rate) density the ratio collapses to shape*(log x_new - log x_old)
    - rate*(x_new - x_old).
    """
    return shape * (math.log(x_new) - math.log(x_old)) - rate * (x_new - x_old)


def update_tau(state: LatentState, data: Dataset, hyper: Hyperparameters,
               rng: np.random.Generator,
               block: bool = False) -> tuple[LatentState, np.ndarray]:
    """Log-normal refresh of each cluster's included mixing variances.

    By default every included coordinate gets its own proposal and
    accept/reject decision; ``block=True`` instead proposes the whole
    cluster jointly with a single decision.  (At the standard step
    length the joint move accepts almost never once half the columns
    are active, which starves the mixing-variance chain, so the
    coordinate-wise sweep is the default.)

    Returns the new state and a per-cluster flag vector: for the
    coordinate sweep the count of accepted coordinates (-1 when the
    cluster has nothing included beyond the intercept); for the block
    move 1 accepted / 0 rejected / -1 no proposal.
    """
    new = state.copy()
    flags = np.full(hyper.K, -1, dtype=int)
    ev = ClusterEvaluator(data, new.s, new.gamma, new.tau2, hyper)
    rate = hyper.tau2_rate
    for k in range(hyper.K):
        incl = np.flatnonzero(new.gamma[k, 1:] == 1) + 1
        if incl.size == 0:
            continue
        members = np.flatnonzero(new.z == k)
        tau_cur = new.tau2[k, incl].copy()
        if block:
            tau_prop = tau_cur * np.exp(hyper.nu_tau
                                        * rng.standard_normal(incl.size))
            log_ratio = (ev.logxi(k, members, tau2c=tau_prop)
                         - ev.logxi(k, members, tau2c=tau_cur))
            for t_new, t_old in zip(tau_prop, tau_cur):
                log_ratio += _log_move_ratio(t_new, t_old, 1.0, rate)
            if math.log(rng.random()) < log_ratio:
                new.tau2[k, incl] = tau_prop
                flags[k] = 1
            else:
                flags[k] = 0
            continue
        accepted = 0
        lx_cur = ev.logxi(k, members, tau2c=tau_cur)
        for pos in range(incl.size):
            t_old = tau_cur[pos]
            t_new = t_old * math.exp(hyper.nu_tau * rng.standard_normal())
            tau_prop = tau_cur.copy()
            tau_prop[pos] = t_new
            lx_prop = ev.logxi(k, members, tau2c=tau_prop)
            log_ratio = (lx_prop - lx_cur
                         + _log_move_ratio(t_new, t_old, 1.0, rate))
            if math.log(rng.random()) < log_ratio:
                tau_cur = tau_prop
                lx_cur = lx_prop
                accepted += 1
        new.tau2[k, incl] = tau_cur
        flags[k] = accepted
    return new, flags


def update_s(state: LatentState, data: Dataset, hyper: Hyperparameters,
             rng: np.random.Generator) -> tuple[LatentState, AcceptanceCounters]:
    """Per-pair refresh of the noise variances.

    Pairs assigned to their cluster get a single-site Metropolis step;
    unassigned pairs do not enter any cluster marginal, so they are
    refreshed with exact Gamma(d/2, d/2) prior draws.  Counters track the
    assigned (Metropolis) proposals only.
    """
    new = state.copy()
    counters = AcceptanceCounters()
    half_d = 0.5 * hyper.dof
    ev = ClusterEvaluator(data, new.s, new.gamma, new.tau2, hyper)
    for k in range(hyper.K):
        members = np.flatnonzero(new.z == k)
        lx_cur = ev.logxi(k, members)
        for i in range(data.n):
            if new.z[i] == k:
                s_cur = new.s[i, k]
                s_prop = s_cur * math.exp(hyper.nu_s * rng.standard_normal())
                col = new.s[:, k].copy()
                col[i] = s_prop
                lx_prop = ev.logxi(k, members, s_col=col)
                log_ratio = (lx_prop - lx_cur
                             + _log_move_ratio(s_prop, s_cur, half_d, half_d))
                counters.s_proposed += 1
                if math.log(rng.random()) < log_ratio:
                    new.s[i, k] = s_prop
                    lx_cur = lx_prop
                    counters.s_accepted += 1
            else:
                new.s[i, k] = rng.gamma(half_d, 1.0 / half_d)
    return new, counters


def update_gamma(state: LatentState, data: Dataset, hyper: Hyperparameters,
                 rng: np.random.Generator) -> tuple[LatentState, AcceptanceCounters]:
    """One birth/death flip proposal per non-intercept column and cluster.

    A birth draws the new mixing variance from its prior, so the prior
    and proposal densities cancel and the acceptance ratio is the
    cluster-marginal ratio times the inclusion prior odds.
    """
    new = state.copy()
    counters = AcceptanceCounters()
    log_odds = math.log(hyper.phi) - math.log1p(-hyper.phi)
    scale = 1.0 / hyper.tau2_rate
    for k in range(hyper.K):
        members = np.flatnonzero(new.z == k)
        cols = included_columns(new.gamma[k])
        s_col = new.s[:, k]
        lx_cur = eval_logxi(data, cols, s_col, members,
                            new.tau2[k, cols[1:]], hyper)
        for d in range(1, data.p):
            counters.gamma_proposed += 1
            if new.gamma[k, d] == 0:
                tau_star = rng.exponential(scale)
                cols_prop = np.sort(np.append(cols, d))
                tau2_prop_row = new.tau2[k].copy()
                tau2_prop_row[d] = tau_star
                lx_prop = eval_logxi(data, cols_prop, s_col, members,
                                     tau2_prop_row[cols_prop[1:]], hyper)
                log_ratio = lx_prop - lx_cur + log_odds
                if math.log(rng.random()) < log_ratio:
                    new.gamma[k, d] = 1
                    new.tau2[k, d] = tau_star
                    cols = cols_prop
                    lx_cur = lx_prop
                    counters.gamma_accepted += 1
            else:
                cols_prop = cols[cols != d]
                lx_prop = eval_logxi(data, cols_prop, s_col, members,
                                     new.tau2[k, cols_prop[1:]], hyper)
                log_ratio = lx_prop - lx_cur - log_odds
                if math.log(rng.random()) < log_ratio:
                    new.gamma[k, d] = 0
                    new.tau2[k, d] = 0.0
                    cols = cols_prop
                    lx_cur = lx_prop
                    counters.gamma_accepted += 1
    return new, counters


def draw_prior_state(data: Dataset, hyper: Hyperparameters,
                     rng: np.random.Generator,
                     z: np.ndarray | None = None) -> LatentState:
    """Draw (s, gamma, tau2) from their priors; labels default to zeros."""
    n, p, K = data.n, data.p, hyper.K
    half_d = 0.5 * hyper.dof
    s = rng.gamma(half_d, 1.0 / half_d, size=(n, K))
    gamma = (rng.random((K, p)) < hyper.phi).astype(np.int64)
    gamma[:, 0] = 1
    tau2 = np.zeros((K, p))
    mask = gamma[:, 1:] == 1
    tau2[:, 1:][mask] = rng.exponential(1.0 / hyper.tau2_rate, size=int(mask.sum()))
    if z is None:
        z = np.zeros(n, dtype=np.int64)
    return LatentState(z=np.asarray(z, dtype=np.int64), s=s,
                       gamma=gamma, tau2=tau2)


def _unique_fraction(system: ParticleSystem) -> float:
    return np.unique(system.paths, axis=0).shape[0] / system.n_particles


def run_chain(data: Dataset, hyper: Hyperparameters, config: ChainConfig,
              rng: np.random.Generator | None = None) -> PosteriorChain:
    """Run the two-stage sampler for a fixed iteration budget."""
    if hyper.K > data.n:
        raise DataError(f"K = {hyper.K} exceeds n = {data.n}")
    if rng is None:
        rng = np.random.default_rng(config.seed)

    state = draw_prior_state(data, hyper, rng)
    s, gamma, tau2 = state.s, state.gamma, state.tau2
    system = smc_run(data, s, gamma, tau2, hyper, rng)
    retained = sample_retained(system, rng)

    samples: list[LatentState] = []
    trace: list[IterationRecord] = []
    counters = AcceptanceCounters()
    N = hyper.N

    for it in range(1, config.iterations + 1):
        system = csmc_run(data, s, gamma, tau2, hyper, retained, rng)
        retained = sample_retained(system, rng)
        state = LatentState(z=retained.labels.copy(), s=s, gamma=gamma, tau2=tau2)

        state, c_s = update_s(state, data, hyper, rng)
        state, c_g = update_gamma(state, data, hyper, rng)
        state, tau_flags = update_tau(state, data, hyper, rng)
        counters.merge(c_s)
        counters.merge(c_g)
        incl_counts = state.gamma[:, 1:].sum(axis=1)
        proposed = tau_flags >= 0
        counters.tau_proposed += int(incl_counts[proposed].sum())
        counters.tau_accepted += int(tau_flags[proposed].sum())
        s, gamma, tau2 = state.s, state.gamma, state.tau2

        trace.append(IterationRecord(
            iteration=it,
            ess_min=float(np.min(system.ess_series)) / N,
            ess_final=float(system.ess_series[-1]) / N,
            unique_paths=_unique_fraction(system),
            resample_count=len(system.resample_epochs),
            log_target=log_target(state, data, hyper),
            acc_tau=counters.tau_rate,
            acc_s=counters.s_rate,
            acc_gamma=counters.gamma_rate,
        ))
        if it > config.burn_in and (it - config.burn_in - 1) % config.thinning == 0:
            samples.append(state.copy())

    return PosteriorChain(samples, trace, counters, config)
