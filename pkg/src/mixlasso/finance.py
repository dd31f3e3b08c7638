"""Price-series feature statistics and the crossover trading response.

Response pipeline: a fast and a slow exponential moving average of the
price series produce a signal held proportional to their difference,
scaled by an exponentially weighted volatility of daily price changes;
daily profit-and-loss is yesterday's position times today's price change
and the response is its annualized Sharpe ratio.

Feature library (daily simple returns r_t = p_t / p_{t-1} - 1 feed every
statistic):

    stdev     sample standard deviation of r (ddof 1)
    skew      m3 / m2^(3/2) with central sample moments m_j
    kurtosis  m4 / m2^2 (uncorrected; 3 under normality)
    autoq     Box-Pierce Q = T * sum_{j<=L} acf_j^2 (default L = 10)
    box2      Ljung-Box Q* = T (T+2) sum_{j<=2} acf_j^2 / (T-j)
    vrt       overlapping two-period variance ratio with unbiased
              scaling, ~1 for a random walk
    rs        rescaled range: range of cumulative demeaned returns over
              their population standard deviation
    ghe       generalized Hurst exponent at moment order 2: half the
              slope of log E|X_{t+l} - X_t|^2 against log l over lags
              1..19, X the cumulative-return path
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .errors import DataError, DegeneracyError

FEATURE_NAMES = ("stdev", "skew", "kurtosis", "autoq", "box2", "vrt", "rs", "ghe")


@dataclass(frozen=True)
class PriceSeries:
    """An ordered, strictly positive price history with optional dates."""

    values: np.ndarray
    dates: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.ndim != 1 or v.shape[0] < 2:
            raise DataError("need at least two prices")
        if not np.all(np.isfinite(v)) or not np.all(v > 0):
            raise DataError("prices must be finite and strictly positive")
        if self.dates is not None and len(self.dates) != v.shape[0]:
            raise DataError("dates must match the price count")


@dataclass(frozen=True)
class StrategyParams:
    """Crossover decay factors, volatility decay and annualization."""

    alpha_fast: float = 0.03
    alpha_slow: float = 0.01
    vol_decay: float = 0.06
    trading_days: int = 250
    warmup: int = 20

    def __post_init__(self) -> None:
        for name in ("alpha_fast", "alpha_slow", "vol_decay"):
            val = getattr(self, name)
            if not 0.0 < val <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1]")
        if self.alpha_fast <= self.alpha_slow:
            raise ValueError("alpha_fast must exceed alpha_slow")
        if self.trading_days < 1:
            raise ValueError("trading_days must be >= 1")
        if self.warmup < 1:
            raise ValueError("warmup must be >= 1")


def ema(prices: np.ndarray, alpha: float) -> np.ndarray:
    """Exponential moving average: out_t = alpha p_t + (1-alpha) out_{t-1}."""
    p = np.asarray(prices, dtype=float)
    if p.size == 0:
        raise DataError("empty price series")
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    out, _ = lfilter([alpha], [1.0, -(1.0 - alpha)], p, zi=[(1.0 - alpha) * p[0]])
    return out


def ew_volatility(prices: np.ndarray, decay: float) -> np.ndarray:
    """Exponentially weighted standard deviation of daily price changes.

    Seeded by the first change's absolute value; index 0 (no change yet)
    is NaN.
    """
    p = np.asarray(prices, dtype=float)
    if p.shape[0] < 2:
        raise DataError("need at least two prices")
    diffs = np.diff(p)
    var = np.empty(p.shape[0])
    var[0] = np.nan
    var[1] = diffs[0] ** 2
    for t in range(2, p.shape[0]):
        var[t] = (1.0 - decay) * var[t - 1] + decay * diffs[t - 1] ** 2
    return np.sqrt(var)


def positions(prices: np.ndarray, params: StrategyParams) -> np.ndarray:
    """Crossover positions (fast minus slow EMA over volatility).

    Zero through the warm-up window; afterwards a vanishing volatility
    (constant prices) leaves the position undefined and raises.
    """
    p = np.asarray(prices, dtype=float)
    fast = ema(p, params.alpha_fast)
    slow = ema(p, params.alpha_slow)
    vol = ew_volatility(p, params.vol_decay)
    pos = np.zeros(p.shape[0])
    live = np.arange(p.shape[0]) >= params.warmup
    if np.any(vol[live] == 0):
        raise DegeneracyError("zero volatility after warm-up: position undefined")
    pos[live] = (fast[live] - slow[live]) / vol[live]
    return pos


def pnl_and_sharpe(prices: np.ndarray, pos: np.ndarray,
                   trading_days: int = 250) -> tuple[np.ndarray, float]:
    """Daily profit-and-loss r_t = pos_{t-1} (p_t - p_{t-1}) and its
    annualized Sharpe ratio mean(r) * D / sqrt(D * Var(r)) with unbiased
    sample variance and D trading days per year."""
    p = np.asarray(prices, dtype=float)
    q = np.asarray(pos, dtype=float)
    if p.shape != q.shape:
        raise DataError("prices and positions must be aligned")
    pnl = q[:-1] * np.diff(p)
    var = float(np.var(pnl, ddof=1))
    if not var > 0:
        raise DegeneracyError("zero-variance pnl: Sharpe undefined")
    sharpe = trading_days * float(np.mean(pnl)) / math.sqrt(trading_days * var)
    return pnl, sharpe


def simple_returns(prices: np.ndarray) -> np.ndarray:
    p = np.asarray(prices, dtype=float)
    return p[1:] / p[:-1] - 1.0


def _acf(x: np.ndarray, max_lag: int) -> np.ndarray:
    xc = x - x.mean()
    denom = float(xc @ xc)
    return np.array([float(xc[lag:] @ xc[:-lag]) / denom
                     for lag in range(1, max_lag + 1)])


def box_pierce(returns: np.ndarray, lags: int = 10) -> float:
    """Portmanteau Q statistic: T times the summed squared autocorrelations."""
    r = np.asarray(returns, dtype=float)
    rho = _acf(r, lags)
    return float(r.shape[0] * np.sum(rho ** 2))


def ljung_box(returns: np.ndarray, lags: int = 2) -> float:
    """Small-sample portmanteau: T(T+2) sum_j acf_j^2 / (T-j)."""
    r = np.asarray(returns, dtype=float)
    T = r.shape[0]
    rho = _acf(r, lags)
    j = np.arange(1, lags + 1)
    return float(T * (T + 2) * np.sum(rho ** 2 / (T - j)))


def variance_ratio(returns: np.ndarray, horizon: int = 2) -> float:
    """Per-period variance of overlapping q-period sums over the
    one-period variance; near 1 for a random walk.

    Both estimators subtract the mean return; the overlap normalizer
    m = q (T - q + 1)(1 - q / T) carries the unbiased scaling (including
    the division by the horizon).
    """
    r = np.asarray(returns, dtype=float)
    T = r.shape[0]
    q = horizon
    if T <= q:
        raise DataError("series shorter than the variance-ratio horizon")
    mu = r.mean()
    var_1 = float(np.sum((r - mu) ** 2)) / (T - 1)
    rolled = np.convolve(r, np.ones(q), mode="valid")
    m = q * (T - q + 1) * (1.0 - q / T)
    var_q = float(np.sum((rolled - q * mu) ** 2)) / m
    return var_q / var_1


def rescaled_range(returns: np.ndarray) -> float:
    """Range of the cumulative demeaned series over its standard deviation."""
    r = np.asarray(returns, dtype=float)
    dev = np.cumsum(r - r.mean())
    spread = float(dev.max() - dev.min())
    sd = float(np.std(r))
    return spread / sd


def generalized_hurst(returns: np.ndarray, max_lag: int = 19) -> float:
    """Moment-scaling Hurst exponent at order 2 on the cumulative path."""
    x = np.cumsum(np.asarray(returns, dtype=float))
    lags = np.arange(1, max_lag + 1)
    k2 = np.array([float(np.mean((x[lag:] - x[:-lag]) ** 2)) for lag in lags])
    slope = np.polyfit(np.log(lags), np.log(k2), 1)[0]
    return float(slope / 2.0)


def compute_features(prices: np.ndarray, *, bp_lags: int = 10,
                     lb_lags: int = 2, vr_horizon: int = 2,
                     ghe_max_lag: int = 19,
                     min_returns: int = 64) -> dict[str, float]:
    """Feature vector of one market, keyed by FEATURE_NAMES.

    Requires at least ``min_returns`` daily returns (the long-memory
    estimators need the room).  A constant series reports stdev 0 and
    NaN for every statistic that is undefined without price variation.
    """
    r = simple_returns(prices)
    if r.shape[0] < min_returns:
        raise DataError(f"need at least {min_returns} returns, got {r.shape[0]}")
    m2 = float(np.var(r))
    if m2 == 0.0:
        out = {name: float("nan") for name in FEATURE_NAMES}
        out["stdev"] = 0.0
        return out
    centered = r - r.mean()
    return {
        "stdev": float(np.std(r, ddof=1)),
        "skew": float(np.mean(centered ** 3) / m2 ** 1.5),
        "kurtosis": float(np.mean(centered ** 4) / m2 ** 2),
        "autoq": box_pierce(r, bp_lags),
        "box2": ljung_box(r, lb_lags),
        "vrt": variance_ratio(r, vr_horizon),
        "rs": rescaled_range(r),
        "ghe": generalized_hurst(r, ghe_max_lag),
    }
