"""JIT-compiled evaluation of cluster marginals for the sampler hot loops.

The SMC pass needs log xi for (particle, cluster) pairs tens of millions
of times per fit; the reference path in :mod:`mixlasso.model` carries too
much per-call overhead for that.  The kernels here recompute the same
quantities from scratch (no downdating) with hand-rolled Cholesky loops,
batched across particles.  ``test_model`` pins them against the reference
implementation.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DegeneracyError
from .model import Dataset, Hyperparameters, included_columns

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

_LOG_PI = math.log(math.pi)


@njit(cache=True)
def _chol_solve_logdet(A, w):
    """In-place lower Cholesky of A; solve L u = w. Returns (ok, log|A|, u'u)."""
    g = A.shape[0]
    half_logdet = 0.0
    for j in range(g):
        d = A[j, j]
        for t in range(j):
            d -= A[j, t] * A[j, t]
        if not (d > 0.0) or not np.isfinite(d):
            return False, 0.0, 0.0
        d = math.sqrt(d)
        A[j, j] = d
        half_logdet += math.log(d)
        for r in range(j + 1, g):
            acc = A[r, j]
            for t in range(j):
                acc -= A[r, t] * A[j, t]
            A[r, j] = acc / d
    ssq = 0.0
    for j in range(g):
        acc = w[j]
        for t in range(j):
            acc -= A[j, t] * w[t]
        acc /= A[j, j]
        w[j] = acc
        ssq += acc * acc
    return True, 2.0 * half_logdet, ssq


@njit(cache=True)
def _logxi_rows(y, Xc, s_col, rows, n_rows, extra_row, tau2c, a, b, lgam_a):
    """log xi for the members ``rows[:n_rows]`` (plus ``extra_row`` if >= 0).

    ``Xc`` is the design matrix already restricted to the cluster's
    included columns (intercept first); ``tau2c`` the matching mixing
    variances.  Returns NaN when the precision matrix is not positive
    definite or the posterior scale is nonpositive.
    """
    g = Xc.shape[1]
    A = np.zeros((g, g))
    w = np.zeros(g)
    A[0, 0] = 1.0
    log_det_v = 0.0
    for d in range(1, g):
        A[d, d] = 1.0 / tau2c[d - 1]
        log_det_v += math.log(tau2c[d - 1])
    n_k = n_rows + (1 if extra_row >= 0 else 0)
    yty = 0.0
    for t in range(n_k):
        i = rows[t] if t < n_rows else extra_row
        inv_s = 1.0 / s_col[i]
        yi = y[i]
        for r in range(g):
            xr = Xc[i, r] * inv_s
            w[r] += xr * yi
            for c in range(r + 1):
                A[r, c] += xr * Xc[i, c]
        yty += yi * yi * inv_s
    for r in range(g):
        for c in range(r + 1, g):
            A[r, c] = A[c, r]
    ok, log_det_prec, qf = _chol_solve_logdet(A, w)
    if not ok:
        return np.nan
    b_star = b + 0.5 * (yty - qf)
    if not (b_star > 0.0):
        return np.nan
    a_star = a + 0.5 * n_k
    return (-0.5 * (log_det_prec + log_det_v)
            + math.lgamma(a_star) - lgam_a
            + a * math.log(b) - a_star * math.log(b_star)
            - 0.5 * n_k * _LOG_PI)


@njit(cache=True)
def _batch_incl_logxi(y, Xc, s_col, tau2c, paths, i, k, a, b, lgam_a, out):
    """For every particle, log xi of cluster k with observation i appended."""
    n_particles = paths.shape[0]
    rows = np.empty(i, dtype=np.int64)
    for j in range(n_particles):
        m = 0
        for l in range(i):
            if paths[j, l] == k:
                rows[m] = l
                m += 1
        out[j] = _logxi_rows(y, Xc, s_col, rows, m, i, tau2c, a, b, lgam_a)


class ClusterEvaluator:
    """Per-sweep workspace for fast cluster-marginal evaluation.

    Holds, for a fixed (data, s, gamma, tau2), the per-cluster column
    restriction of X and the matching tau2 vectors.  Rebuild (or call
    :meth:`refresh`) after gamma or tau2 changes; mutations of s are
    visible immediately because the s matrix is shared, not copied.
    """

    def __init__(self, data: Dataset, s: np.ndarray, gamma: np.ndarray,
                 tau2: np.ndarray, hyper: Hyperparameters) -> None:
        self.data = data
        self.s = np.ascontiguousarray(s, dtype=float)
        self.hyper = hyper
        self._lgam_a = math.lgamma(hyper.a)
        self._y = np.ascontiguousarray(data.y, dtype=float)
        self.refresh(gamma, tau2)

    def refresh(self, gamma: np.ndarray, tau2: np.ndarray) -> None:
        self.gamma = gamma
        self.tau2 = tau2
        self._Xc = []
        self._tau2c = []
        for k in range(self.hyper.K):
            cols = included_columns(gamma[k])
            self._Xc.append(np.ascontiguousarray(self.data.X[:, cols]))
            self._tau2c.append(np.ascontiguousarray(tau2[k, cols[1:]], dtype=float))

    def logxi(self, k: int, members: np.ndarray,
              s_col: np.ndarray | None = None,
              tau2c: np.ndarray | None = None) -> float:
        """log xi of cluster k over the given member indices.

        ``s_col`` and ``tau2c`` override the cluster's current noise
        column / mixing variances without touching the shared state
        (used by the Metropolis proposals).
        """
        rows = np.ascontiguousarray(members, dtype=np.int64)
        col = self.s[:, k] if s_col is None else s_col
        t2c = self._tau2c[k] if tau2c is None else np.ascontiguousarray(tau2c, dtype=float)
        val = _logxi_rows(self._y, self._Xc[k], np.ascontiguousarray(col),
                          rows, rows.shape[0], -1, t2c,
                          self.hyper.a, self.hyper.b, self._lgam_a)
        if math.isnan(val):
            raise DegeneracyError(f"cluster marginal degenerate (cluster {k})")
        return val

    def batch_incl_logxi(self, paths: np.ndarray, i: int, k: int,
                         out: np.ndarray) -> None:
        """log xi with observation i appended, for every particle path."""
        s_col = np.ascontiguousarray(self.s[:, k])
        _batch_incl_logxi(self._y, self._Xc[k], s_col, self._tau2c[k],
                          paths, i, k, self.hyper.a, self.hyper.b,
                          self._lgam_a, out)


def eval_logxi(data: Dataset, cols: np.ndarray, s_col: np.ndarray,
               members: np.ndarray, tau2c: np.ndarray,
               hyper: Hyperparameters) -> float:
    """One-off log xi for an arbitrary column set (used by selector flips)."""
    Xc = np.ascontiguousarray(data.X[:, cols])
    rows = np.ascontiguousarray(members, dtype=np.int64)
    val = _logxi_rows(np.ascontiguousarray(data.y, dtype=float), Xc,
                      np.ascontiguousarray(s_col, dtype=float), rows,
                      rows.shape[0], -1,
                      np.ascontiguousarray(tau2c, dtype=float),
                      hyper.a, hyper.b, math.lgamma(hyper.a))
    if math.isnan(val):
        raise DegeneracyError("cluster marginal degenerate")
    return val
