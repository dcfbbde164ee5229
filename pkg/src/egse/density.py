"""Joint log-densities of the extended skew-elliptical family and its G-transform.

``ese_logpdf`` evaluates the selection model ``W = X | lambda'(X - mu) + tau > Z``
on the real line; ``egse_logpdf`` evaluates ``Y = (G_1^{-1}(W_1), ...)`` on
``D^n`` by adding the log-Jacobian of the links.  ``to_identifiable`` and
``from_identifiable`` convert to and from the correlation-matrix chart
``(mu, Sigma_*, delta, gamma)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.linalg import cho_solve

from .elliptical import (
    GAUSSIAN,
    EllipticalParams,
    GeneratorKind,
    cholesky,
    conditional_skewing_logcdf,
    log_generator,
    log_normalization_constant,
    mahalanobis,
    univariate_logcdf,
)
from .links import LinkDomainError, LinkSpec

__all__ = [
    "Theta",
    "PsiTheta",
    "bivariate_theta",
    "ese_logpdf",
    "egse_logpdf",
    "transform_data",
    "log_jacobian",
    "to_identifiable",
    "from_identifiable",
    "SKEW_CDF_FLOOR",
]

SKEW_CDF_FLOOR = 1e-300
_LOG_FLOOR = math.log(SKEW_CDF_FLOOR)


@dataclass(frozen=True)
class Theta:
    """Full parameter set ``(mu, Sigma, lambda, tau)`` plus the generator kind.

    ``sigma`` is the dispersion matrix of the elliptical law (for Student-t it
    is not the covariance).
    """

    mu: np.ndarray
    sigma: np.ndarray
    lam: np.ndarray
    tau: float = 0.0
    kind: GeneratorKind = GAUSSIAN
    _chol: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float)).copy()
        n = mu.size
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=float)).copy()
        lam = np.atleast_1d(np.asarray(self.lam, dtype=float)).copy()
        if sigma.shape != (n, n):
            raise ValueError(f"sigma has shape {sigma.shape}, expected {(n, n)}")
        if lam.size != n:
            raise ValueError(f"lambda has length {lam.size}, expected {n}")
        tau = float(self.tau)
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(lam)) and math.isfinite(tau)):
            raise ValueError("parameters must be finite")
        for a in (mu, sigma, lam):
            a.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "_chol", cholesky(sigma))

    @property
    def n(self) -> int:
        return self.mu.size

    @property
    def chol(self) -> np.ndarray:
        return self._chol

    @property
    def elliptical(self) -> EllipticalParams:
        return EllipticalParams(self.mu, self.sigma)

    @property
    def skew_scale(self) -> float:
        """``sqrt(1 + lambda' Sigma lambda)``."""
        return math.sqrt(1.0 + float(self.lam @ self.sigma @ self.lam))

    def replace(self, **changes) -> "Theta":
        return replace(self, **changes)

    # bivariate convenience accessors used by the CLI and the study harness
    @property
    def scales(self) -> np.ndarray:
        return np.sqrt(np.diag(self.sigma))

    @property
    def rho(self) -> float:
        if self.n != 2:
            raise ValueError("rho is defined for bivariate parameters only")
        s = self.scales
        return float(self.sigma[0, 1] / (s[0] * s[1]))

    def to_dict(self) -> dict:
        out = {"mu": self.mu.tolist(), "lambda": self.lam.tolist(), "tau": self.tau}
        if self.n == 2:
            s = self.scales
            out.update(sigma1=float(s[0]), sigma2=float(s[1]), rho=self.rho)
        else:
            out["sigma"] = self.sigma.tolist()
        if not self.kind.is_gaussian:
            out["nu"] = self.kind.nu
        return out

    @classmethod
    def from_dict(cls, d: dict, kind: GeneratorKind | None = None) -> "Theta":
        """Inverse of :meth:`to_dict`; accepts either ``sigma`` or ``sigma1/sigma2/rho``."""
        if kind is None:
            kind = GeneratorKind("student", d["nu"]) if d.get("nu") is not None else GAUSSIAN
        lam = d.get("lambda", d.get("lam"))
        if "sigma" in d:
            sigma = np.asarray(d["sigma"], dtype=float)
        else:
            sigma = _bivariate_sigma(d["sigma1"], d["sigma2"], d["rho"])
        mu = np.atleast_1d(np.asarray(d["mu"], dtype=float))
        if lam is None:
            lam = np.zeros(mu.size)
        return cls(mu, sigma, lam, d.get("tau", 0.0), kind)


def _bivariate_sigma(s1, s2, rho):
    return np.array([[s1 * s1, rho * s1 * s2], [rho * s1 * s2, s2 * s2]], dtype=float)


def bivariate_theta(mu1, mu2, sigma1, sigma2, rho, lam1=0.0, lam2=0.0, tau=0.0,
                    kind: GeneratorKind = GAUSSIAN) -> Theta:
    """Theta from the ``(sigma1, sigma2, rho)`` parameterisation of a 2x2 dispersion."""
    return Theta([mu1, mu2], _bivariate_sigma(sigma1, sigma2, rho), [lam1, lam2], tau, kind)


@dataclass(frozen=True)
class PsiTheta:
    """Identifiable chart: location, correlation matrix, ``delta`` and ``gamma``."""

    mu: np.ndarray
    sigma_star: np.ndarray
    delta: np.ndarray
    gamma: float

    def to_dict(self) -> dict:
        return {
            "mu": np.asarray(self.mu).tolist(),
            "sigma_star": np.asarray(self.sigma_star).tolist(),
            "delta": np.asarray(self.delta).tolist(),
            "gamma": float(self.gamma),
        }


# --- densities -----------------------------------------------------------

def _as_rows(x, n: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    rows = np.atleast_2d(x)
    if rows.shape[1] != n:
        raise ValueError(f"points have dimension {rows.shape[1]}, expected {n}")
    return rows, single


def ese_logpdf(w, theta: Theta):
    """Log-density of ``W ~ ESE_n(mu, Sigma, lambda, tau)`` at a point or at rows of points."""
    rows, single = _as_rows(w, theta.n)
    out = _ese_logpdf_rows(rows, theta)
    return out[0] if single else out


def _ese_logpdf_rows(rows: np.ndarray, theta: Theta) -> np.ndarray:
    n, kind = theta.n, theta.kind
    q = mahalanobis(rows, theta.elliptical, chol=theta.chol)
    half_logdet = float(np.sum(np.log(np.diag(theta.chol))))
    log_ell = log_generator(kind, n, q) - half_logdet - log_normalization_constant(kind, n)
    a = (rows - theta.mu) @ theta.lam + theta.tau
    log_skew = np.maximum(conditional_skewing_logcdf(kind, a, q, extra_df_base=n), _LOG_FLOOR)
    log_norm = float(univariate_logcdf(kind, theta.tau / theta.skew_scale))
    return log_ell + log_skew - log_norm


def _check_column(col: np.ndarray, i: int, link: LinkSpec):
    lo, hi = link.domain
    bad = np.flatnonzero(~((col > lo) & (col < hi)))
    if bad.size:
        r = int(bad[0])
        raise LinkDomainError(
            f"row {r + 1}, coordinate {i + 1}: {float(col[r])!r} is outside the open domain "
            f"({lo:g}, {hi:g}) of link {link.token}"
        )


def transform_data(y, links: Sequence[LinkSpec]) -> np.ndarray:
    """Apply ``G_i`` column-wise; ``y`` has shape ``(m, n)`` or ``(n,)``."""
    y = np.asarray(y, dtype=float)
    rows = np.atleast_2d(y)
    if rows.shape[1] != len(links):
        raise ValueError(f"got {rows.shape[1]} columns but {len(links)} links")
    out = np.empty_like(rows)
    for i, link in enumerate(links):
        _check_column(rows[:, i], i, link)
        out[:, i] = link.forward(rows[:, i])
    return out[0] if y.ndim == 1 else out


def log_jacobian(y, links: Sequence[LinkSpec]):
    """``sum_i log G_i'(y_i)`` per row."""
    y = np.asarray(y, dtype=float)
    rows = np.atleast_2d(y)
    total = np.zeros(rows.shape[0])
    for i, link in enumerate(links):
        _check_column(rows[:, i], i, link)
        total += link.log_deriv(rows[:, i])
    return total[0] if y.ndim == 1 else total


def egse_logpdf(y, theta: Theta, links: Sequence[LinkSpec]):
    """Log-density of ``Y ~ EGSE_n``: ESE log-density at ``G(y)`` plus the log-Jacobian."""
    if len(links) != theta.n:
        raise ValueError(f"expected {theta.n} links, got {len(links)}")
    rows, single = _as_rows(y, theta.n)
    yg = transform_data(rows, links)
    out = _ese_logpdf_rows(yg, theta) + log_jacobian(rows, links)
    return out[0] if single else out


# --- identifiable chart -----------------------------------------------------

def to_identifiable(theta: Theta) -> PsiTheta:
    """Map ``(mu, Sigma, lambda, tau)`` to ``(mu, Sigma_*, delta, gamma)``.

    ``Sigma_*`` is the correlation matrix of ``Sigma``.  The chart is proved
    identifiable only for the Gaussian generator; for Student-t it is still a
    valid reparameterisation but not known to be identifiable.
    """
    omega = np.sqrt(np.diag(theta.sigma))
    corr = theta.sigma / np.outer(omega, omega)
    lam = theta.lam
    root = math.sqrt(1.0 + float(lam @ corr @ lam))
    return PsiTheta(theta.mu.copy(), corr, corr @ lam / root, theta.tau / root)


def from_identifiable(psi: PsiTheta) -> tuple[np.ndarray, float]:
    """Recover ``(lambda, tau)`` from ``(Sigma_*, delta, gamma)``."""
    corr = np.asarray(psi.sigma_star, dtype=float)
    delta = np.atleast_1d(np.asarray(psi.delta, dtype=float))
    L = cholesky(corr)
    sol = cho_solve((L, True), delta)
    r = float(delta @ sol)
    if not r < 1.0:
        raise ValueError(f"delta lies outside the unit ellipsoid (delta' Sigma_*^-1 delta = {r:.6g})")
    root = math.sqrt(1.0 - r)
    return sol / root, float(psi.gamma) / root
