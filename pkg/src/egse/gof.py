"""Goodness-of-fit diagnostics for bivariate EGSE fits.

Residuals are Rosenblatt-type quantile residuals: ``Phi^{-1}`` of the fitted
marginal CDF of ``Y_1`` and of the fitted conditional CDF of ``Y_2`` given
``Y_1``.  Under a correct continuous model the pooled ``2m`` values are
standard normal.  One-sample KS and Anderson-Darling tests against ``N(0, 1)``
and QQ coordinates are provided.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special, stats

from .density import Theta
from .links import LinkSpec
from .marginals import conditional_params, est1_tails, marginal_params

__all__ = [
    "ResidualReport",
    "quantile_residuals",
    "residual_report",
    "ks_test",
    "ad_test",
    "ad_cdf",
    "qq_points",
    "CLAMP",
]

CLAMP = 1e-12
MIN_TEST_SIZE = 5


@dataclass(frozen=True)
class ResidualReport:
    residuals: np.ndarray
    ks_stat: float
    ks_pvalue: float
    ad_stat: float
    ad_pvalue: float
    seed: int | None
    clamped: int = 0
    pooled: bool = True

    def to_dict(self) -> dict:
        return {"ks_stat": self.ks_stat, "ks_pvalue": self.ks_pvalue, "ad_stat": self.ad_stat,
                "ad_pvalue": self.ad_pvalue, "seed": self.seed, "clamped": self.clamped,
                "n_residuals": int(self.residuals.size), "residuals": self.residuals.tolist()}


def _normal_score(cdf: float, sf: float) -> tuple[float, bool]:
    """``Phi^{-1}`` of a CDF value, using whichever tail is smaller, with clamping."""
    if cdf <= 0.5:
        p = min(max(cdf, CLAMP), 0.5)
        return float(special.ndtri(p)), cdf < CLAMP
    p = min(max(sf, CLAMP), 0.5)
    return float(-special.ndtri(p)), sf < CLAMP


def quantile_residuals(data, fit, links: Sequence[LinkSpec], seed: int | None = None,
                       conditional: bool = True, return_clamped: bool = False):
    """Quantile residuals ``(r_1[0..m), r_2[0..m))`` concatenated.

    Parameters
    ----------
    data : Dataset or array of shape (m, 2)
    fit : FitResult or Theta
    links : two LinkSpec
    seed : int, optional
        Unused for continuous data; kept so discrete links can randomize.
    conditional : bool
        ``True`` uses the conditional law of ``Y_2`` given ``Y_1`` for the
        second residual; ``False`` uses the marginal of ``Y_2`` (per-margin
        residuals, not independent across coordinates).
    """
    theta: Theta = getattr(fit, "theta_hat", fit)
    if theta.n != 2:
        raise ValueError("quantile residuals are defined for bivariate fits")
    y = np.atleast_2d(np.asarray(getattr(data, "values", data), dtype=float))
    w = np.column_stack([links[0].forward(y[:, 0]), links[1].forward(y[:, 1])])
    m1 = marginal_params(theta, 0, 1)
    m2 = marginal_params(theta, 1, 0)
    r = np.empty((2, w.shape[0]))
    clamped = 0
    for k, (w1, w2) in enumerate(w):
        r[0, k], c1 = _normal_score(*est1_tails(w1, m1))
        p2 = conditional_params(theta, 0, 1, w1) if conditional else m2
        r[1, k], c2 = _normal_score(*est1_tails(w2, p2))
        clamped += c1 + c2
    if clamped:
        warnings.warn(f"{clamped} CDF values clamped to [{CLAMP:g}, 1 - {CLAMP:g}]",
                      RuntimeWarning, stacklevel=2)
    out = r.ravel()
    return (out, clamped) if return_clamped else out


def _check_sample(sample) -> np.ndarray:
    x = np.asarray(sample, dtype=float).ravel()
    if x.size < MIN_TEST_SIZE:
        raise ValueError(f"at least {MIN_TEST_SIZE} observations are needed, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError("sample contains non-finite values")
    return x


def ks_test(sample) -> tuple[float, float]:
    """One-sample KS against ``N(0, 1)``; p-value from the limiting Kolmogorov law."""
    x = np.sort(_check_sample(sample))
    m = x.size
    F = special.ndtr(x)
    i = np.arange(1, m + 1)
    d = max(float(np.max(i / m - F)), float(np.max(F - (i - 1) / m)))
    return d, float(stats.kstwobign.sf(math.sqrt(m) * d))


def _adinf(z: float) -> float:
    # limiting CDF of A^2, rational approximation accurate to ~1e-6
    if z <= 0:
        return 0.0
    if z < 2.0:
        return math.exp(-1.2337141 / z) / math.sqrt(z) * (
            2.00012 + (0.247105 - (0.0649821 - (0.0347962 - (0.011672 - 0.00168691 * z) * z) * z) * z) * z)
    return math.exp(-math.exp(1.0776 - (2.30695 - (0.43424 - (0.082433 - (0.008056 - 0.0003146 * z)
                                                             * z) * z) * z) * z))


def _errfix(n: int, x: float) -> float:
    # finite-sample correction to the limiting CDF, as a function of that CDF value
    if x > 0.8:
        return (-130.2137 + (745.2337 - (1705.091 - (1950.646 - (1116.360 - 255.7844 * x) * x)
                                         * x) * x) * x) / n
    c = 0.01265 + 0.1757 / n
    if x < c:
        t = x / c
        t = math.sqrt(t) * (1.0 - t) * (49 * t - 102)
        return t * (0.0037 / (n * n) + 0.00078 / n + 0.00006) / n
    t = (x - c) / (0.8 - c)
    t = -0.00022633 + (6.54034 - (14.6538 - (14.458 - (8.259 - 1.91864 * t) * t) * t) * t) * t
    return t * (0.04213 + 0.01365 / n) / n


def ad_cdf(z: float, n: int | None = None) -> float:
    """CDF of the Anderson-Darling statistic for a fully specified null."""
    x = _adinf(z)
    if n is not None:
        x += _errfix(n, x)
    return min(max(x, 0.0), 1.0)


def ad_test(sample) -> tuple[float, float]:
    """Anderson-Darling test against ``N(0, 1)`` with no estimated parameters."""
    x = np.sort(_check_sample(sample))
    m = x.size
    i = np.arange(1, m + 1)
    log_F = special.log_ndtr(x)
    log_S = special.log_ndtr(-x[::-1])
    a2 = -m - float(np.sum((2 * i - 1) * (log_F + log_S))) / m
    return a2, 1.0 - ad_cdf(a2, m)


def qq_points(sample) -> np.ndarray:
    """``(theoretical, empirical)`` pairs: ``Phi^{-1}((i - 0.5)/m)`` against the sorted sample."""
    x = np.sort(np.asarray(sample, dtype=float).ravel())
    if x.size == 0:
        raise ValueError("sample is empty")
    m = x.size
    theo = special.ndtri((np.arange(1, m + 1) - 0.5) / m)
    return np.column_stack([theo, x])


def residual_report(data, fit, links: Sequence[LinkSpec], seed: int | None = None,
                    conditional: bool = True) -> ResidualReport:
    """Residuals plus KS and AD results on the pooled sample."""
    r, clamped = quantile_residuals(data, fit, links, seed, conditional, return_clamped=True)
    ks = ks_test(r)
    ad = ad_test(r)
    return ResidualReport(r, ks[0], ks[1], ad[0], ad[1], seed, clamped, True)
