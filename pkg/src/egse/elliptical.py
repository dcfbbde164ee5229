"""Gaussian and Student-t elliptical building blocks.

Density generators, normalising constants, the elliptical log-density, the
univariate standard CDFs and the CDF of the conditional law of the selection
variable ``Z`` given ``X`` (the "skewing CDF").

Student-t CDFs go through the regularised incomplete beta function; the
Gaussian ones through ``erf``/``log_ndtr``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, linalg, special

__all__ = [
    "GeneratorKind",
    "GAUSSIAN",
    "student",
    "parse_generator",
    "EllipticalParams",
    "generator_value",
    "log_generator",
    "normalization_constant",
    "log_normalization_constant",
    "elliptical_logpdf",
    "mahalanobis",
    "univariate_cdf",
    "univariate_logcdf",
    "univariate_logpdf",
    "conditional_skewing_cdf",
    "conditional_skewing_cdf_quad",
    "cholesky",
]

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class GeneratorKind:
    """Elliptical family: ``gaussian`` or ``student`` with ``nu`` degrees of freedom."""

    family: str = "gaussian"
    nu: float | None = None

    def __post_init__(self):
        if self.family not in ("gaussian", "student"):
            raise ValueError(f"unknown generator family {self.family!r}")
        if self.family == "student":
            if self.nu is None or not (self.nu > 0) or not math.isfinite(self.nu):
                raise ValueError("student generator needs finite nu > 0")
            object.__setattr__(self, "nu", float(self.nu))
        elif self.nu is not None:
            raise ValueError("gaussian generator takes no nu")

    @property
    def is_gaussian(self) -> bool:
        return self.family == "gaussian"

    @property
    def token(self) -> str:
        return "normal" if self.is_gaussian else f"student:{self.nu:g}"

    def shifted(self, extra: int) -> "GeneratorKind":
        """Univariate kind with ``extra`` more degrees of freedom (Gaussian unchanged)."""
        return self if self.is_gaussian else GeneratorKind("student", self.nu + extra)

    def __str__(self):
        return self.token


GAUSSIAN = GeneratorKind()


def student(nu: float) -> GeneratorKind:
    return GeneratorKind("student", nu)


def parse_generator(token: str) -> GeneratorKind:
    """``normal`` / ``gaussian`` or ``student:<nu>``."""
    token = token.strip().lower()
    if token in ("normal", "gaussian"):
        return GAUSSIAN
    family, _, nu = token.partition(":")
    if family in ("student", "t") and nu:
        return student(float(nu))
    raise ValueError(f"cannot parse generator {token!r}; use 'normal' or 'student:<nu>'")


@dataclass(frozen=True)
class EllipticalParams:
    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        if sigma.shape != (mu.size, mu.size):
            raise ValueError(f"sigma has shape {sigma.shape}, expected {(mu.size, mu.size)}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)


def cholesky(sigma) -> np.ndarray:
    """Lower Cholesky factor; raises ``numpy.linalg.LinAlgError`` unless ``sigma`` is SPD."""
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    if not np.allclose(sigma, sigma.T, rtol=1e-12, atol=1e-14):
        raise np.linalg.LinAlgError("dispersion matrix is not symmetric")
    if not np.all(np.isfinite(sigma)):
        raise np.linalg.LinAlgError("dispersion matrix has non-finite entries")
    try:
        return linalg.cholesky(sigma, lower=True)
    except linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"dispersion matrix is not positive definite: {exc}") from None


# --- generators -----------------------------------------------------------

def log_generator(kind: GeneratorKind, n: int, u):
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise ValueError("generator argument must be >= 0")
    if kind.is_gaussian:
        return -0.5 * u
    nu = kind.nu
    return -0.5 * (nu + n) * np.log1p(u / nu)


def generator_value(kind: GeneratorKind, n: int, u):
    return np.exp(log_generator(kind, n, u))


def log_generator_deriv_ratio(kind: GeneratorKind, n: int, u):
    """``g'(u) / g(u)`` for the ``n``-dimensional generator."""
    u = np.asarray(u, dtype=float)
    if kind.is_gaussian:
        return np.full_like(u, -0.5)
    return -0.5 * (kind.nu + n) / (kind.nu + u)


def log_normalization_constant(kind: GeneratorKind, n: int) -> float:
    if n < 1:
        raise ValueError("dimension must be >= 1")
    if kind.is_gaussian:
        return 0.5 * n * LOG_2PI
    nu = kind.nu
    return special.gammaln(nu / 2) + 0.5 * n * math.log(nu * math.pi) - special.gammaln((nu + n) / 2)


def normalization_constant(kind: GeneratorKind, n: int) -> float:
    return math.exp(log_normalization_constant(kind, n))


# --- multivariate density -------------------------------------------------

def mahalanobis(x, p: EllipticalParams, chol: np.ndarray | None = None):
    """Quadratic form ``(x - mu)' Sigma^{-1} (x - mu)`` via a triangular solve.

    ``x`` may be a single point (shape ``(n,)``) or rows of points ``(m, n)``.
    """
    L = cholesky(p.sigma) if chol is None else chol
    x = np.asarray(x, dtype=float)
    d = np.atleast_2d(x) - p.mu
    if d.shape[1] != p.mu.size:
        raise ValueError(f"points have dimension {d.shape[1]}, expected {p.mu.size}")
    z = linalg.solve_triangular(L, d.T, lower=True)
    q = np.einsum("ij,ij->j", z, z)
    return q[0] if x.ndim == 1 else q


def elliptical_logpdf(x, p: EllipticalParams, kind: GeneratorKind):
    L = cholesky(p.sigma)
    n = p.mu.size
    q = mahalanobis(x, p, chol=L)
    half_logdet = np.sum(np.log(np.diag(L)))
    return log_generator(kind, n, q) - half_logdet - log_normalization_constant(kind, n)


# --- univariate CDFs -------------------------------------------------------

def _student_lower_tail(t, nu):
    # P(T <= -|t|) = I_{nu/(nu+t^2)}(nu/2, 1/2) / 2
    t = np.asarray(t, dtype=float)
    x = nu / (nu + t * t)
    return 0.5 * special.betainc(0.5 * nu, 0.5, x)


def univariate_cdf(kind: GeneratorKind, z):
    z = np.asarray(z, dtype=float)
    if kind.is_gaussian:
        return special.ndtr(z)
    tail = _student_lower_tail(z, kind.nu)
    return np.where(z < 0, tail, 1.0 - tail)


def univariate_logcdf(kind: GeneratorKind, z):
    z = np.asarray(z, dtype=float)
    if kind.is_gaussian:
        return special.log_ndtr(z)
    tail = _student_lower_tail(z, kind.nu)
    with np.errstate(divide="ignore"):
        return np.where(z < 0, np.log(tail), np.log1p(-tail))


def univariate_logpdf(kind: GeneratorKind, z):
    z = np.asarray(z, dtype=float)
    return log_generator(kind, 1, z * z) - log_normalization_constant(kind, 1)


# --- conditional skewing CDF -----------------------------------------------

def _skewing_arg(kind: GeneratorKind, x, q, extra_df_base: int):
    x = np.asarray(x, dtype=float)
    q = np.asarray(q, dtype=float)
    if np.any(q < 0):
        raise ValueError("quadratic form q must be >= 0")
    if kind.is_gaussian:
        return x, kind
    df = kind.nu + extra_df_base
    return x * np.sqrt(df / (kind.nu + q)), kind.shifted(extra_df_base)


def conditional_skewing_cdf(kind: GeneratorKind, x, q, extra_df_base: int = 1):
    """CDF at ``x`` of ``Z | X`` when the quadratic form of ``X`` equals ``q``.

    ``extra_df_base`` is the dimension of ``X``.  For the Student family the
    conditional law is Student-t with ``nu + extra_df_base`` degrees of freedom
    and squared scale ``(nu + q) / (nu + extra_df_base)``; for the Gaussian
    family it is standard normal whatever ``q``.
    """
    t, k = _skewing_arg(kind, x, q, extra_df_base)
    return univariate_cdf(k, t)


def conditional_skewing_logcdf(kind: GeneratorKind, x, q, extra_df_base: int = 1):
    t, k = _skewing_arg(kind, x, q, extra_df_base)
    return univariate_logcdf(k, t)


def conditional_skewing_cdf_quad(kind: GeneratorKind, x: float, q: float, extra_df_base: int = 1,
                                 epsabs: float = 1e-12) -> float:
    """Same quantity by direct quadrature of the conditional generator.

    Integrates ``g^(d+1)(s^2 + q)`` over ``(-inf, x]`` after ``s = tan(t)`` and
    divides by the integral over the whole line, so the normaliser is the one
    that makes the CDF reach one.  Kept independent of the closed form for
    cross-checking.
    """
    if q < 0:
        raise ValueError("quadratic form q must be >= 0")
    d = extra_df_base
    scale = log_generator(kind, d + 1, q)  # keeps integrand O(1) for large q

    def integrand(t):
        s = math.tan(t)
        return math.exp(float(log_generator(kind, d + 1, s * s + q)) - scale) / math.cos(t) ** 2

    upper = math.atan(x)
    opts = dict(epsabs=epsabs, epsrel=1e-12, limit=200)
    left, _ = integrate.quad(integrand, -math.pi / 2, upper, **opts)
    right, _ = integrate.quad(integrand, upper, math.pi / 2, **opts)
    return left / (left + right)
