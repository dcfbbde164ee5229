"""Moments and Kullback-Leibler divergence.

Mixed moments ``E[prod Y_i^{m_i}]`` have a closed form only for log links
with the Gaussian generator; every other case is estimated by Monte Carlo
over :func:`egse.sampler.sample_egse`.  The KL divergence between two
EGSE laws with the same links equals the divergence between the underlying
ESE laws, so it is estimated in ``W``-space without touching the links.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special

from .density import Theta, ese_logpdf
from .links import LinkSpec
from .sampler import sample_egse, sample_ese

__all__ = [
    "MomentRequest",
    "UnsupportedModelError",
    "log_link_mixed_moment",
    "mc_moment",
    "estimate_moment",
    "kl_divergence_mc",
    "kl_gaussian_closed_form",
]

CLOSED_FORM = "closed_form_log_link"
MONTE_CARLO = "monte_carlo"


class UnsupportedModelError(ValueError):
    """The requested closed form does not apply to these parameters."""


@dataclass(frozen=True)
class MomentRequest:
    """Exponent vector ``m`` of the mixed moment plus estimator settings."""

    m: tuple
    estimator: str = MONTE_CARLO
    mc_size: int = 100_000
    seed: int | None = None

    def __post_init__(self):
        m = tuple(int(v) for v in np.atleast_1d(self.m))
        if any(v < 0 for v in m):
            raise ValueError("exponents must be nonnegative integers")
        if self.estimator not in (CLOSED_FORM, MONTE_CARLO):
            raise ValueError(f"unknown estimator {self.estimator!r}")
        object.__setattr__(self, "m", m)


def log_link_mixed_moment(m, theta: Theta) -> float:
    """``E[prod Y_i^{m_i}]`` for ``Y_i = exp(W_i)`` with a Gaussian generator.

    Equals ``exp(m'mu + m'Sigma m / 2) Phi((lambda'Sigma m + tau)/s) / Phi(tau/s)``
    with ``s = sqrt(1 + lambda'Sigma lambda)``.
    """
    if not theta.kind.is_gaussian:
        raise UnsupportedModelError(
            "closed-form moments need the Gaussian generator; Student moments may not exist"
        )
    m = np.asarray(m, dtype=float)
    if m.shape != (theta.n,):
        raise ValueError(f"exponent vector must have length {theta.n}")
    S = theta.sigma
    s = theta.skew_scale
    log_mgf = float(m @ theta.mu + 0.5 * m @ S @ m)
    num = special.log_ndtr((float(theta.lam @ S @ m) + theta.tau) / s)
    den = special.log_ndtr(theta.tau / s)
    return math.exp(log_mgf + (num - den))


def mc_moment(req: MomentRequest, theta: Theta, links: Sequence[LinkSpec]) -> tuple[float, float]:
    """Monte Carlo mean and standard error of ``prod Y_i^{m_i}``."""
    if req.mc_size < 1000:
        raise ValueError("mc_size must be at least 1000")
    m = np.asarray(req.m, dtype=float)
    if m.shape != (theta.n,):
        raise ValueError(f"exponent vector must have length {theta.n}")
    if not theta.kind.is_gaussian:
        warnings.warn("moments of Student-generator models need not exist; "
                      "the Monte Carlo estimate may not converge", RuntimeWarning, stacklevel=2)
    if not np.any(m):
        return 1.0, 0.0
    y = sample_egse(theta, links, req.mc_size, seed=req.seed).values
    vals = np.prod(y ** m, axis=1)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(vals.size))


def kl_divergence_mc(theta1: Theta, theta2: Theta, links: Sequence[LinkSpec] | None = None,
                     mc_size: int = 100_000, seed: int | None = None) -> tuple[float, float]:
    """Monte Carlo estimate of ``KL(f_1 || f_2)``.

    ``links`` is accepted for interface symmetry and deliberately ignored:
    the divergence is invariant under the common coordinate-wise bijection.
    """
    if theta1.n != theta2.n:
        raise ValueError("both laws must have the same dimension")
    if theta1.kind != theta2.kind:
        raise ValueError("both laws must use the same generator")
    w = sample_ese(theta1, mc_size, seed=seed).values
    d = ese_logpdf(w, theta1) - ese_logpdf(w, theta2)
    return float(d.mean()), float(d.std(ddof=1) / math.sqrt(d.size))


def kl_gaussian_closed_form(theta1: Theta, theta2: Theta) -> float:
    """Multivariate normal KL divergence; both laws must have ``lambda = 0`` and ``tau = 0``."""
    for t in (theta1, theta2):
        if not t.kind.is_gaussian or np.any(t.lam != 0) or t.tau != 0:
            raise UnsupportedModelError("closed form needs Gaussian laws with lambda = 0, tau = 0")
    if theta1.n != theta2.n:
        raise ValueError("both laws must have the same dimension")
    n = theta1.n
    L2 = theta2.chol
    a = np.linalg.solve(L2, theta1.chol)
    d = np.linalg.solve(L2, theta2.mu - theta1.mu)
    logdet = 2.0 * (np.sum(np.log(np.diag(L2))) - np.sum(np.log(np.diag(theta1.chol))))
    return float(0.5 * (np.sum(a * a) + d @ d - n + logdet))


def estimate_moment(req: MomentRequest, theta: Theta, links: Sequence[LinkSpec]) -> dict:
    """Dispatch on ``req.estimator``; returns ``{estimate, stderr, method}``."""
    if req.estimator == CLOSED_FORM:
        if any(link.kind != "log" for link in links):
            raise UnsupportedModelError("closed-form moments need log links on every coordinate")
        return {"estimate": log_link_mixed_moment(req.m, theta), "stderr": 0.0, "method": CLOSED_FORM}
    est, se = mc_moment(req, theta, links)
    return {"estimate": est, "stderr": se, "method": MONTE_CARLO}
