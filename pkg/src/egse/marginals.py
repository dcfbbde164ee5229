"""Univariate extended skew-t / skew-normal laws and the marginals and
conditionals of ESE and EGSE vectors.

A one-dimensional ``EST_1(mu, sigma2, lambda, nu, tau)`` law has density

    (1/sigma) f_nu(z) F_{nu+1}((lambda z + tau) sqrt((nu+1)/(nu+z^2))) / F_nu(tau / sqrt(1+lambda^2))

with ``z = (x - mu)/sigma``; ``nu = inf`` gives the skew-normal ``ESN_1``.
CDF and survival function are computed by adaptive quadrature.

Component indices ``i`` and ``j`` are zero-based throughout this module.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate, optimize, special

from .density import SKEW_CDF_FLOOR, Theta
from .elliptical import GAUSSIAN, student, univariate_logcdf, univariate_logpdf
from .links import LinkSpec

__all__ = [
    "Est1Params",
    "QuadratureError",
    "est1_logpdf",
    "est1_pdf",
    "est1_cdf",
    "est1_survival",
    "est1_tails",
    "marginal_params",
    "conditional_params",
    "marginal_logpdf",
    "selection_conditional_logpdf",
    "marginal_quantile",
]

_LOG_FLOOR = math.log(SKEW_CDF_FLOOR)
QUAD_EPSABS = 1e-12
QUAD_EPSREL = 1e-10


class QuadratureError(ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance."""


@dataclass(frozen=True)
class Est1Params:
    """Parameters of ``EST_1``; ``nu = math.inf`` selects the skew-normal branch."""

    mu: float = 0.0
    sigma2: float = 1.0
    lam: float = 0.0
    nu: float = math.inf
    tau: float = 0.0

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be > 0")
        if not self.nu > 0:
            raise ValueError("nu must be > 0 (use math.inf for the normal case)")

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    @property
    def is_normal(self) -> bool:
        return math.isinf(self.nu)

    def to_dict(self) -> dict:
        return {"mu": self.mu, "sigma2": self.sigma2, "lambda": self.lam,
                "nu": None if self.is_normal else self.nu, "tau": self.tau}


def _kinds(p: Est1Params):
    if p.is_normal:
        return GAUSSIAN, GAUSSIAN
    return student(p.nu), student(p.nu + 1)


def _std_logpdf(z, p: Est1Params):
    base, skew = _kinds(p)
    z = np.asarray(z, dtype=float)
    if p.is_normal:
        arg = p.lam * z + p.tau
    else:
        arg = (p.lam * z + p.tau) * np.sqrt((p.nu + 1) / (p.nu + z * z))
    log_skew = np.maximum(univariate_logcdf(skew, arg), _LOG_FLOOR)
    log_norm = univariate_logcdf(base, p.tau / math.sqrt(1 + p.lam * p.lam))
    return univariate_logpdf(base, z) + log_skew - log_norm


def est1_logpdf(x, p: Est1Params):
    """Log-density of ``EST_1`` / ``ESN_1`` at ``x`` (scalar or array)."""
    z = (np.asarray(x, dtype=float) - p.mu) / p.sigma
    return _std_logpdf(z, p) - 0.5 * math.log(p.sigma2)


def est1_pdf(x, p: Est1Params):
    return np.exp(est1_logpdf(x, p))


def _quad(f, a, b):
    val, err, info = integrate.quad(f, a, b, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL,
                                    limit=200, full_output=1)[:3]
    if err > max(1e-9, 1e-6 * abs(val)):
        raise QuadratureError(f"quadrature on ({a}, {b}) reached only {err:.3g}")
    return val


def _scalar_pdf(p: Est1Params):
    """Standardized density as a plain-float closure; same formula as ``_std_logpdf``."""
    lam, tau = p.lam, p.tau
    if p.is_normal:
        log_norm = float(special.log_ndtr(tau / math.sqrt(1 + lam * lam)))
        c = -0.5 * math.log(2 * math.pi) - log_norm

        def f(z):
            return math.exp(c - 0.5 * z * z + max(special.log_ndtr(lam * z + tau), _LOG_FLOOR))
        return f
    nu = p.nu
    log_norm = float(univariate_logcdf(student(nu), tau / math.sqrt(1 + lam * lam)))
    c = (math.lgamma((nu + 1) / 2) - math.lgamma(nu / 2) - 0.5 * math.log(nu * math.pi)) - log_norm

    def f(z):
        arg = (lam * z + tau) * math.sqrt((nu + 1) / (nu + z * z))
        skew = special.stdtr(nu + 1, arg)
        log_skew = math.log(skew) if skew > SKEW_CDF_FLOOR else _LOG_FLOOR
        return math.exp(c - 0.5 * (nu + 1) * math.log1p(z * z / nu) + log_skew)
    return f


def _tails_scalar(z: float, p: Est1Params) -> tuple[float, float]:
    if z == math.inf:
        return 1.0, 0.0
    if z == -math.inf:
        return 0.0, 1.0
    f = _scalar_pdf(p)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        # split at 0 so the bulk of the mass is never hidden inside an infinite range
        if z <= 0:
            left = _quad(f, -math.inf, z)
            right = _quad(f, z, 0.0) + _quad(f, 0.0, math.inf)
        else:
            left = _quad(f, -math.inf, 0.0) + _quad(f, 0.0, z)
            right = _quad(f, z, math.inf)
    total = left + right
    return left / total, right / total


def est1_tails(x, p: Est1Params):
    """``(CDF, SF)`` at ``x``; each tail is integrated directly so both keep relative accuracy."""
    x = np.asarray(x, dtype=float)
    z = ((x - p.mu) / p.sigma).ravel()
    out = np.array([_tails_scalar(float(v), p) for v in z]).reshape(z.shape + (2,))
    cdf, sf = out[..., 0].reshape(x.shape), out[..., 1].reshape(x.shape)
    if x.ndim == 0:
        return float(cdf), float(sf)
    return cdf, sf


def est1_cdf(x, p: Est1Params):
    return est1_tails(x, p)[0]


def est1_survival(x, p: Est1Params):
    return est1_tails(x, p)[1]


# --- marginal and conditional parameters ---------------------------------------

def _check_pair(theta: Theta, i: int, j: int | None):
    n = theta.n
    if not 0 <= i < n:
        raise IndexError(f"component index {i} out of range for n={n}")
    if j is not None:
        if not 0 <= j < n:
            raise IndexError(f"component index {j} out of range for n={n}")
        if i == j:
            raise ValueError("i and j must differ")


def _kind_nu(theta: Theta) -> float:
    return math.inf if theta.kind.is_gaussian else theta.kind.nu


def marginal_params(theta: Theta, i: int, j: int | None = None) -> Est1Params:
    """``EST_1`` parameters of the marginal ``W_i``.

    The slant acts on the standardized coordinate; the part of ``lambda'X``
    not explained by ``X_i`` is folded into the selection noise.  For ``n = 2``
    this is the pairwise form with residual variance
    ``lambda_j^2 sigma_jj (1 - rho^2)``.  ``j`` is accepted for symmetry with
    :func:`conditional_params` and only validated.
    """
    _check_pair(theta, i, j)
    S, lam = theta.sigma, theta.lam
    s_ii = S[i, i]
    cov = float(S[i] @ lam)              # Cov(lambda'X, X_i)
    resid = float(lam @ S @ lam) - cov * cov / s_ii
    resid = max(resid, 0.0)
    root = math.sqrt(1.0 + resid)
    return Est1Params(float(theta.mu[i]), float(s_ii), cov / math.sqrt(s_ii) / root,
                      _kind_nu(theta), theta.tau / root)


def conditional_params(theta: Theta, i: int, j: int, w_i: float) -> Est1Params:
    """``EST_1`` parameters of ``W_j | W_i = w_i`` for a bivariate ``theta``."""
    if theta.n != 2:
        raise ValueError("conditional_params is defined for bivariate parameters")
    _check_pair(theta, i, j)
    S, lam, mu = theta.sigma, theta.lam, theta.mu
    si, sj = math.sqrt(S[i, i]), math.sqrt(S[j, j])
    rho = S[i, j] / (si * sj)
    z = (w_i - mu[i]) / si
    loc = mu[j] + sj * rho * z
    slant = lam[j] * sj * math.sqrt(1.0 - rho * rho)
    shift = (lam[i] * si + lam[j] * sj * rho) * z + theta.tau
    var = S[j, j] * (1.0 - rho * rho)
    if theta.kind.is_gaussian:
        return Est1Params(float(loc), float(var), float(slant), math.inf, float(shift))
    nu = theta.kind.nu
    factor = (nu + z * z) / (nu + 1.0)
    return Est1Params(float(loc), float(var * factor), float(slant), nu + 1.0,
                      float(shift / math.sqrt(factor)))


# --- EGSE marginals, selection conditionals, quantiles ---------------------------

def marginal_logpdf(y, i: int, theta: Theta, links: Sequence[LinkSpec]):
    """Log-density of ``Y_i`` at ``y``."""
    link = links[i]
    return est1_logpdf(link.forward(y), marginal_params(theta, i)) + link.log_deriv(y)


def selection_conditional_logpdf(y, i: int, j: int, kappa: float, theta: Theta,
                                 links: Sequence[LinkSpec]):
    """Log-density of ``Y_i`` given ``Y_j > kappa`` at ``y`` (scalar or array)."""
    _check_pair(theta, i, j)
    wk = float(links[j].forward(kappa))
    y = np.asarray(y, dtype=float)
    wi = links[i].forward(y)
    base = est1_logpdf(wi, marginal_params(theta, i)) + links[i].log_deriv(y)
    log_den = math.log(est1_survival(wk, marginal_params(theta, j)))
    num = np.array([est1_survival(wk, conditional_params(theta, i, j, float(w)))
                    for w in np.atleast_1d(wi)])
    with np.errstate(divide="ignore"):
        out = base + np.log(num).reshape(np.shape(wi)) - log_den
    return float(out) if y.ndim == 0 else out


def marginal_quantile(p: float, i: int, theta: Theta, links: Sequence[LinkSpec],
                      xtol: float = 1e-10) -> float:
    """``p``-quantile of ``Y_i``: ``G_i^{-1}`` of the ``W_i`` quantile."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    mp = marginal_params(theta, i)
    lo, hi = mp.mu - 40 * mp.sigma, mp.mu + 40 * mp.sigma

    def h(x):
        cdf, sf = est1_tails(x, mp)
        return cdf - p if p <= 0.5 else (1.0 - p) - sf

    # heavy Student tails can put extreme quantiles far beyond 40 sigma
    width = 40 * mp.sigma
    for _ in range(40):
        if h(lo) <= 0:
            break
        width *= 4
        lo = mp.mu - width
    width = 40 * mp.sigma
    for _ in range(40):
        if h(hi) >= 0:
            break
        width *= 4
        hi = mp.mu + width
    if h(lo) > 0 or h(hi) < 0:
        raise ArithmeticError(f"quantile {p} not bracketed by [{lo:.6g}, {hi:.6g}]")
    w = optimize.brentq(h, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps)
    return float(links[i].inverse(w))
