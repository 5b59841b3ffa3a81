"""Empirical statistics backing every simulation-vs-formula check.

Cumulants are estimated by k-statistics (unbiased), the ACF by the biased
divide-by-n estimator (positive semidefinite), and standard errors come from
batch means across independent replicates, never from pooling dependent
samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SCHEMA_VERSION = 1


def _power_sums(y, rmax=4):
    return [np.sum(y ** r) for r in range(1, rmax + 1)]


def _k_from_sums(S1, S2, S3, S4, n):
    k1 = S1 / n
    k2 = (n * S2 - S1 ** 2) / (n * (n - 1))
    k3 = (n ** 2 * S3 - 3 * n * S2 * S1 + 2 * S1 ** 3) / (n * (n - 1) * (n - 2))
    k4 = ((-6 * S1 ** 4 + 12 * n * S1 ** 2 * S2 - 3 * n * (n - 1) * S2 ** 2
           - 4 * n * (n + 1) * S1 * S3 + n ** 2 * (n + 1) * S4)
          / (n * (n - 1) * (n - 2) * (n - 3)))
    return k1, k2, k3, k4


@dataclass
class EmpiricalSummary:
    n: int
    mean: float
    variance: float
    k: dict            # order -> k-statistic, orders 1..4
    se: dict           # order -> standard error
    acf: dict = field(default_factory=dict)  # lag -> (estimate, se)

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "n": self.n,
            "mean": self.mean,
            "variance": self.variance,
            "cumulants": {str(i): self.k[i] for i in sorted(self.k)},
            "standard_errors": {str(i): self.se[i] for i in sorted(self.se)},
            "acf": {str(lag): list(v) for lag, v in sorted(self.acf.items())},
        }


def summarize(samples) -> EmpiricalSummary:
    """Unbiased k-statistics of orders 1..4 with standard errors.

    k1 and k2 get moment-based SEs; k3 and k4 get jackknife SEs computed in
    O(n) through leave-one-out power sums.
    """
    x = np.asarray(samples, dtype=float).ravel()
    n = x.size
    if n < 2:
        raise ValueError("need at least two samples")
    mean = float(np.mean(x))
    y = x - mean  # k2..k4 are shift invariant; centring stabilises the sums
    S1, S2, S3, S4 = _power_sums(y)
    k1c, k2, k3, k4 = _k_from_sums(S1, S2, S3, S4, n) if n >= 4 else (
        0.0, float(np.var(x, ddof=1)), np.nan, np.nan)
    k = {1: mean, 2: float(k2), 3: float(k3), 4: float(k4)}

    se = {1: float(np.sqrt(max(k[2], 0.0) / n))}
    if n >= 4 and np.isfinite(k4):
        se[2] = float(np.sqrt(max(k4 / n + 2 * k2 ** 2 / (n - 1), 0.0)))
        # leave-one-out power sums, vectorised
        m = n - 1
        T1, T2, T3, T4 = (S1 - y, S2 - y ** 2, S3 - y ** 3, S4 - y ** 4)
        _, _, k3i, k4i = _k_from_sums(T1, T2, T3, T4, m)
        for order, vals in ((3, k3i), (4, k4i)):
            dev = vals - np.mean(vals)
            se[order] = float(np.sqrt((n - 1) / n * np.sum(dev ** 2)))
    else:
        se.update({2: np.nan, 3: np.nan, 4: np.nan})
    return EmpiricalSummary(n=n, mean=mean, variance=k[2], k=k, se=se)


@dataclass
class CFTable:
    """Empirical characteristic function on a zeta grid with SE bands."""

    zeta: np.ndarray
    value: np.ndarray   # complex
    se_re: np.ndarray
    se_im: np.ndarray

    @property
    def se(self):
        return np.sqrt(self.se_re ** 2 + self.se_im ** 2)

    def log(self):
        """Empirical log-CF with delta-method SEs."""
        mod = np.abs(self.value)
        return np.log(self.value), self.se / np.maximum(mod, 1e-300)


def empirical_cf(samples, zeta_grid) -> CFTable:
    x = np.asarray(samples, dtype=float).ravel()
    z = np.atleast_1d(np.asarray(zeta_grid, dtype=float))
    n = x.size
    phase = np.exp(1j * z[:, None] * x[None, :])
    val = phase.mean(axis=1)
    se_re = phase.real.std(axis=1, ddof=1) / np.sqrt(n)
    se_im = phase.imag.std(axis=1, ddof=1) / np.sqrt(n)
    return CFTable(zeta=z, value=val, se_re=se_re, se_im=se_im)


def empirical_acf(paths, lags) -> dict:
    """Pooled across-replicate ACF of stationary paths.

    ``paths`` has shape (replicates, length); lags are in index units.  Each
    replicate contributes one biased (divide-by-n) ACF estimate; the pooled
    estimate and its batch-means SE are returned per lag.
    """
    paths = np.atleast_2d(np.asarray(paths, dtype=float))
    n_rep, length = paths.shape
    lags = [int(l) for l in np.atleast_1d(lags)]
    if max(lags) >= length:
        raise ValueError(f"lag {max(lags)} beyond path length {length}")
    centred = paths - paths.mean(axis=1, keepdims=True)
    denom = np.sum(centred ** 2, axis=1)
    out = {}
    for lag in lags:
        if lag == 0:
            out[0] = (1.0, 0.0)
            continue
        num = np.sum(centred[:, lag:] * centred[:, :-lag], axis=1)
        per_rep = num / denom
        est = float(np.mean(per_rep))
        se = float(np.std(per_rep, ddof=1) / np.sqrt(n_rep)) if n_rep > 1 else np.nan
        out[lag] = (est, se)
    return out


def mean_with_se(samples):
    x = np.asarray(samples, dtype=float).ravel()
    return float(np.mean(x)), float(np.std(x, ddof=1) / np.sqrt(x.size))


def var_with_se(samples):
    s = summarize(samples)
    return s.k[2], s.se[2]


def cov_with_se(x, y):
    """Across-replicate covariance of paired samples with a moment-based SE."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    n = x.size
    dx, dy = x - x.mean(), y - y.mean()
    c = float(np.sum(dx * dy) / (n - 1))
    var_c = (np.mean((dx * dy) ** 2) - np.mean(dx * dy) ** 2) / n
    return c, float(np.sqrt(max(var_c, 0.0)))


def corr_with_se(x, y):
    """Across-replicate correlation with a delta-method SE."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    n = x.size
    r = float(np.corrcoef(x, y)[0, 1])
    se = (1.0 - r ** 2) / np.sqrt(max(n - 3, 1))
    return r, float(se)
