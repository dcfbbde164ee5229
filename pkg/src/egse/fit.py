"""Maximum-likelihood estimation for EGSE models.

The log-likelihood keeps the link Jacobian ``sum log G_i'(y_i)``, so reported
values are true log-likelihoods of the data (comparable only between fits
that share links).  Gradients are analytic.  Three coordinate systems appear:

* the structured gradient: ``(mu, Sigma, lambda, tau)`` with ``Sigma`` as a
  symmetric matrix (:func:`loglik_gradient_structured`);
* the precision chart: ``(mu, free entries of Sigma^{-1}, lambda, tau)``
  (:func:`loglik_gradient`);
* the optimizer chart: ``(mu, log-Cholesky entries of Sigma, lambda, tau)``.

Standard errors come from a finite-difference Hessian of the analytic
gradient in the optimizer chart, mapped by the delta method to the reporting
chart ``(mu, sigma_i, rho_ij, lambda, tau)``.
"""

from __future__ import annotations

import itertools
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import optimize, stats

from .density import (
    SKEW_CDF_FLOOR,
    PsiTheta,
    Theta,
    egse_logpdf,
    from_identifiable,
    log_jacobian,
    to_identifiable,
    transform_data,
)
from .elliptical import (
    GAUSSIAN,
    GeneratorKind,
    log_generator,
    log_generator_deriv_ratio,
    log_normalization_constant,
    student,
    univariate_logcdf,
    univariate_logpdf,
)
from .links import LinkSpec

__all__ = [
    "FitOptions",
    "FitResult",
    "loglikelihood",
    "loglik_gradient",
    "loglik_gradient_structured",
    "fit_mle",
    "profile_nu",
    "standard_errors",
    "Chart",
    "report_names",
]

logger = logging.getLogger(__name__)

_LOG_FLOOR = math.log(SKEW_CDF_FLOOR)
MIN_ROWS = 10
NOISE_REL = 1e-12     # relative rounding noise of the summed log-likelihood
MAX_SKEW_SCALE = 1e3  # sqrt(1 + lambda' Sigma lambda) beyond this means |delta| -> 1, no finite maximizer


@dataclass(frozen=True)
class FitOptions:
    """Optimizer settings.

    ``tau_fixed=None`` estimates ``tau``; a number pins it.  ``workers`` > 1
    runs profile fits in separate processes.
    """

    tau_fixed: float | None = None
    max_iter: int = 500
    gradient_tolerance: float = 1e-6
    step_tolerance: float = 1e-9
    nu_grid: tuple = tuple(range(1, 51))
    compute_se: bool = True
    max_line_search_failures: int = 3
    workers: int = 1
    multistart: bool = True

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not (self.gradient_tolerance > 0 and self.step_tolerance > 0):
            raise ValueError("tolerances must be > 0")
        object.__setattr__(self, "nu_grid", tuple(float(v) for v in self.nu_grid))
        if not self.nu_grid:
            raise ValueError("nu_grid must not be empty")


@dataclass
class FitResult:
    theta_hat: Theta
    psi_hat: PsiTheta
    std_errors: np.ndarray | None
    se_names: tuple
    loglik: float
    converged: bool
    iterations: int
    nu_profile: list | None = None
    trace: list = field(default_factory=list)
    grad_norm: float = math.nan
    message: str = ""
    hessian_ok: bool = False
    tau_fixed: float | None = None

    def se_dict(self) -> dict | None:
        if self.std_errors is None:
            return None
        return {k: float(v) for k, v in zip(self.se_names, self.std_errors)}

    def to_dict(self) -> dict:
        out = {
            "theta": self.theta_hat.to_dict(),
            "psi": self.psi_hat.to_dict(),
            "se": self.se_dict(),
            "loglik": self.loglik,
            "converged": self.converged,
            "iterations": self.iterations,
            "grad_norm": self.grad_norm,
            "message": self.message,
            "tau_fixed": self.tau_fixed,
        }
        if not self.theta_hat.kind.is_gaussian:
            out["theta"]["nu"] = self.theta_hat.kind.nu
        if self.nu_profile is not None:
            out["nu_profile"] = [[float(a), float(b)] for a, b in self.nu_profile]
        return out


def _values(data) -> np.ndarray:
    vals = getattr(data, "values", data)
    return np.atleast_2d(np.asarray(vals, dtype=float))


# --- log-likelihood and gradients ----------------------------------------------

def loglikelihood(data, theta: Theta, links: Sequence[LinkSpec]) -> float:
    """``sum_k log f_Y(y_k)``, Jacobian included."""
    return float(np.sum(egse_logpdf(_values(data), theta, links)))


def _w_loglik_and_grad(w: np.ndarray, theta: Theta, want_grad: bool = True):
    """Log-likelihood of ``W`` rows (no Jacobian) and its structured gradient."""
    m, n = w.shape
    kind = theta.kind
    mu, S, lam, tau = theta.mu, theta.sigma, theta.lam, theta.tau
    L = theta.chol
    P = np.linalg.inv(S)
    P = 0.5 * (P + P.T)
    d = w - mu
    Pd = d @ P
    q = np.einsum("ij,ij->i", d, Pd)
    a = d @ lam + tau
    Sl = S @ lam
    s = math.sqrt(1.0 + float(lam @ Sl))
    c = tau / s

    half_logdet = float(np.sum(np.log(np.diag(L))))
    ll = log_generator(kind, n, q) - half_logdet - log_normalization_constant(kind, n)
    if kind.is_gaussian:
        t = a
        dt_da = np.ones(m)
        dt_dq = np.zeros(m)
        skew_kind = GAUSSIAN
    else:
        nu = kind.nu
        root = np.sqrt((nu + n) / (nu + q))
        t = a * root
        dt_da = root
        dt_dq = -0.5 * t / (nu + q)
        skew_kind = kind.shifted(n)
    log_F = univariate_logcdf(skew_kind, t)
    floored = log_F < _LOG_FLOOR
    ll = ll + np.where(floored, _LOG_FLOOR, log_F)
    log_F0 = float(univariate_logcdf(kind, c))
    total = float(np.sum(ll)) - m * log_F0
    if not want_grad:
        return total, None

    hazard = np.where(floored, 0.0, np.exp(univariate_logpdf(skew_kind, t) - log_F))
    r_a = hazard * dt_da
    r_q = hazard * dt_dq
    psi = log_generator_deriv_ratio(kind, n, q)
    h0 = math.exp(float(univariate_logpdf(kind, c)) - log_F0)

    coef_q = psi + r_q                                   # d ell_k / d q_k
    g_mu = -2.0 * (coef_q @ Pd) - np.sum(r_a) * lam
    g_lam = r_a @ d + m * h0 * tau * Sl / s**3
    g_tau = float(np.sum(r_a)) - m * h0 / s
    G_sigma = -(Pd.T * coef_q) @ Pd - 0.5 * m * P + m * h0 * tau * np.outer(lam, lam) / (2 * s**3)
    G_sigma = 0.5 * (G_sigma + G_sigma.T)
    return total, (g_mu, G_sigma, g_lam, g_tau)


def loglik_gradient_structured(data, theta: Theta, links: Sequence[LinkSpec]):
    """Gradient as ``(d/dmu, d/dSigma, d/dlambda, d/dtau)``.

    ``d/dSigma`` is the symmetric matrix ``G`` with ``d ell = tr(G dSigma)``
    for symmetric perturbations.
    """
    w = transform_data(_values(data), links)
    return _w_loglik_and_grad(np.atleast_2d(w), theta)[1]


def _upper_indices(n):
    return [(i, j) for i in range(n) for j in range(i, n)]


def loglik_gradient(data, theta: Theta, links: Sequence[LinkSpec]) -> np.ndarray:
    """Gradient over ``(mu, free entries of Sigma^{-1}, lambda, tau)``.

    The free entries of the precision matrix are its upper triangle in row
    order; an off-diagonal coordinate moves both symmetric entries at once.
    """
    g_mu, G_S, g_lam, g_tau = loglik_gradient_structured(data, theta, links)
    G_P = -theta.sigma @ G_S @ theta.sigma
    free = [G_P[i, j] if i == j else 2.0 * G_P[i, j] for i, j in _upper_indices(theta.n)]
    return np.concatenate([g_mu, free, g_lam, [g_tau]])


# --- optimizer chart ---------------------------------------------------------------

class Chart:
    """Unconstrained coordinates ``(mu, log-Cholesky(Sigma), lambda, tau?)``."""

    def __init__(self, n: int, kind: GeneratorKind, tau_fixed: float | None):
        self.n, self.kind, self.tau_fixed = n, kind, tau_fixed
        self.tril = np.tril_indices(n)
        self.diag_pos = [k for k, (i, j) in enumerate(zip(*self.tril)) if i == j]
        self.n_chol = len(self.tril[0])
        self.dim = 2 * n + self.n_chol + (0 if tau_fixed is not None else 1)

    def pack(self, theta: Theta) -> np.ndarray:
        ent = theta.chol[self.tril].copy()
        ent[self.diag_pos] = np.log(ent[self.diag_pos])
        parts = [theta.mu, ent, theta.lam]
        if self.tau_fixed is None:
            parts.append([theta.tau])
        return np.concatenate(parts)

    def _split(self, x):
        n, k = self.n, self.n_chol
        return x[:n], x[n:n + k], x[n + k:2 * n + k]

    def chol(self, x) -> np.ndarray:
        ent = self._split(x)[1].copy()
        ent[self.diag_pos] = np.exp(ent[self.diag_pos])
        L = np.zeros((self.n, self.n))
        L[self.tril] = ent
        return L

    def unpack(self, x) -> Theta:
        mu, _, lam = self._split(x)
        L = self.chol(x)
        S = L @ L.T
        S = 0.5 * (S + S.T)
        tau = self.tau_fixed if self.tau_fixed is not None else float(x[-1])
        return Theta(mu, S, lam, tau, self.kind)

    def gradient(self, x, structured) -> np.ndarray:
        g_mu, G_S, g_lam, g_tau = structured
        L = self.chol(x)
        gL = (2.0 * G_S @ L)[self.tril]
        gL[self.diag_pos] *= L[np.diag_indices(self.n)]
        parts = [g_mu, gL, g_lam]
        if self.tau_fixed is None:
            parts.append([g_tau])
        return np.concatenate(parts)


def report_names(n: int, tau_free: bool = True) -> tuple:
    names = [f"mu{i + 1}" for i in range(n)] + [f"sigma{i + 1}" for i in range(n)]
    if n == 2:
        names.append("rho")
    else:
        names += [f"rho{i + 1}{j + 1}" for i in range(n) for j in range(i + 1, n)]
    names += [f"lambda{i + 1}" for i in range(n)]
    if tau_free:
        names.append("tau")
    return tuple(names)


def _report_vector(theta: Theta, tau_free: bool) -> np.ndarray:
    n = theta.n
    sd = np.sqrt(np.diag(theta.sigma))
    corr = theta.sigma / np.outer(sd, sd)
    rhos = [corr[i, j] for i in range(n) for j in range(i + 1, n)]
    parts = [theta.mu, sd, rhos, theta.lam]
    if tau_free:
        parts.append([theta.tau])
    return np.concatenate(parts)


class _Objective:
    """Negative log-likelihood in chart coordinates with a one-point cache."""

    def __init__(self, w: np.ndarray, jac: float, chart: Chart):
        self.w, self.jac, self.chart = w, jac, chart
        self._key = None
        self._val = None
        self.evals = 0

    def _eval(self, x):
        key = x.tobytes()
        if key != self._key:
            self.evals += 1
            try:
                theta = self.chart.unpack(x)
                with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                    ll, st = _w_loglik_and_grad(self.w, theta)
                    val = -(ll + self.jac)
                    grad = -self.chart.gradient(x, st)
                if not (math.isfinite(val) and np.all(np.isfinite(grad))):
                    raise FloatingPointError
            except (FloatingPointError, np.linalg.LinAlgError, ValueError, OverflowError):
                val, grad = math.inf, np.full(x.size, np.nan)
            self._key, self._val = key, (val, grad)
        return self._val

    def f(self, x):
        return self._eval(x)[0]

    def g(self, x):
        return self._eval(x)[1]


def _armijo(obj: _Objective, x, p, f0, g0, alpha=1.0, c1=1e-4, shrink=0.5, tries=40):
    slope = float(g0 @ p)
    for _ in range(tries):
        f1 = obj.f(x + alpha * p)
        if f1 <= f0 + c1 * alpha * slope:
            return alpha
        alpha *= shrink
    return None


def _maximize(obj: _Objective, x0: np.ndarray, opts: FitOptions):
    """Quasi-Newton ascent on the log-likelihood (descent on ``obj``)."""
    x = x0.copy()
    f, g = obj.f(x), obj.g(x)
    if not math.isfinite(f):
        raise ValueError("log-likelihood is not finite at the starting point")
    dim = x.size
    H = np.eye(dim)
    scaled = False
    trace = [-f]
    failures = 0
    fallbacks = 0
    it = 0
    message = "maximum iterations reached"
    while it < opts.max_iter:
        if np.max(np.abs(g)) <= opts.gradient_tolerance:
            message = "gradient tolerance reached"
            break
        p = -H @ g
        if not float(g @ p) < 0:
            H, scaled = np.eye(dim), False
            p = -g
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", optimize.OptimizeWarning)
            warnings.simplefilter("ignore", RuntimeWarning)
            alpha = optimize.line_search(obj.f, obj.g, x, p, gfk=g, old_fval=f, maxiter=30)[0]
        if alpha is None or not obj.f(x + alpha * p) <= f:
            alpha = _armijo(obj, x, p, f, g)
        if alpha is None:
            failures += 1
            H, scaled = np.eye(dim), False
            if failures < opts.max_line_search_failures:
                continue
            if fallbacks >= 2:
                message = "line search failed repeatedly"
                break
            fallbacks += 1
            failures = 0
            res = optimize.minimize(obj.f, x, method="Nelder-Mead",
                                    options={"maxiter": 400 * dim, "xatol": opts.step_tolerance,
                                             "fatol": 1e-12, "adaptive": True})
            if res.fun < f:
                x, f, g = res.x, obj.f(res.x), obj.g(res.x)
                trace.append(-f)
                it += 1
                continue
            message = "line search failed and simplex fallback made no progress"
            break
        failures = 0
        step = alpha * p
        x_new = x + step
        f_new, g_new = obj.f(x_new), obj.g(x_new)
        y = g_new - g
        sy = float(step @ y)
        if sy > 1e-12 * np.linalg.norm(step) * np.linalg.norm(y):
            if not scaled:
                H = np.eye(dim) * (sy / float(y @ y))
                scaled = True
            rho = 1.0 / sy
            V = np.eye(dim) - rho * np.outer(step, y)
            H = V @ H @ V.T + rho * np.outer(step, step)
        x, f, g = x_new, f_new, g_new
        trace.append(-f)
        it += 1
        if np.max(np.abs(step)) < opts.step_tolerance:
            message = "step tolerance reached"
            break
    if np.max(np.abs(g)) > opts.gradient_tolerance and math.isfinite(f):
        x, f, g, extra = _newton_polish(obj, x, f, g, opts, trace)
        it += extra
        if np.max(np.abs(g)) <= opts.gradient_tolerance:
            message = "gradient tolerance reached after Newton polish"
    grad_norm = float(np.max(np.abs(g)))
    return x, -f, grad_norm, it, trace, message


def _newton_polish(obj: _Objective, x, f, g, opts: FitOptions, trace, max_steps: int = 20):
    """Newton steps with a finite-difference Hessian of the analytic gradient.

    Used when quasi-Newton stalls close to an optimum because its curvature
    estimate is too crude to push the gradient below the tolerance.  Stops
    as soon as the Hessian is not positive definite or a step fails to
    improve the objective.
    """
    steps = 0
    for _ in range(max_steps):
        if np.max(np.abs(g)) <= opts.gradient_tolerance:
            break
        H = _hessian(obj, x)
        if not np.all(np.isfinite(H)):
            break
        try:
            c = np.linalg.cholesky(H)
        except np.linalg.LinAlgError:
            break
        p = -np.linalg.solve(c.T, np.linalg.solve(c, g))
        noise = NOISE_REL * max(1.0, abs(f))
        gmax = np.max(np.abs(g))
        alpha, accepted = 1.0, False
        for _ in range(30):
            x_new = x + alpha * p
            f1, g1 = obj.f(x_new), obj.g(x_new)
            # near the optimum the decrease drops below rounding noise of f, so a
            # step that shrinks the gradient is accepted if f is unchanged within noise
            if f1 < f or (f1 <= f + noise and np.max(np.abs(g1)) < gmax):
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
        x, f, g = x_new, f1, g1
        trace.append(-f)
        steps += 1
    return x, f, g, steps


def _start(w: np.ndarray, kind: GeneratorKind, tau_fixed: float | None) -> Theta:
    """Elliptical start: sample moments of ``G(y)`` with ``lambda = 0``."""
    n = w.shape[1]
    mu = w.mean(axis=0)
    S = np.atleast_2d(np.cov(w, rowvar=False))
    S = 0.5 * (S + S.T) + 1e-10 * np.eye(n)
    if not kind.is_gaussian and kind.nu > 2:
        S = S * (kind.nu - 2) / kind.nu       # covariance -> dispersion
    return Theta(mu, S, np.zeros(n), 0.0 if tau_fixed is None else tau_fixed, kind)


def _moment_start(w: np.ndarray, kind: GeneratorKind, tau_fixed: float | None,
                  signs=1.0) -> Theta | None:
    """Skew-normal method-of-moments start built from marginal sample skewness.

    ``lambda = 0`` is always a stationary point of the likelihood when
    ``tau = 0`` and ``mu`` sits at the sample mean, so an optimizer started
    there never leaves it; this start breaks the symmetry.  ``signs`` flips
    the skewness of individual coordinates.  A fixed nonzero ``tau`` shifts
    the location and scale through the extended mean ``zeta1(gamma)``.
    """
    n = w.shape[1]
    base = _start(w, kind, tau_fixed)
    g1 = np.asarray(signs) * np.clip(stats.skew(w, axis=0), -0.99, 0.99)
    c = np.cbrt(2.0 * g1 / (4.0 - math.pi))
    delta = np.clip(c / np.sqrt(1.0 + c * c) * math.sqrt(math.pi / 2.0), -0.95, 0.95)
    if not np.any(delta):
        return None
    sd = np.sqrt(np.diag(base.sigma))
    corr = base.sigma / np.outer(sd, sd)
    r = float(delta @ np.linalg.solve(corr, delta))
    if r >= 0.9:
        delta = delta * math.sqrt(0.9 / r)
        r = 0.9
    gamma = base.tau * math.sqrt(1.0 - r)
    zeta1 = math.exp(stats.norm.logpdf(gamma) - stats.norm.logcdf(gamma))
    zeta2 = -zeta1 * (gamma + zeta1)
    omega = sd / np.sqrt(1.0 + zeta2 * delta**2)
    mu = base.mu - omega * delta * zeta1
    lam_star, _ = from_identifiable(PsiTheta(mu, corr, delta, 0.0))
    S = corr * np.outer(omega, omega)
    return Theta(mu, S, lam_star / omega, base.tau, kind)


def _sign_patterns(n: int):
    if n > 3:
        return [np.ones(n), -np.ones(n)]
    return [np.array(p) for p in itertools.product((1.0, -1.0), repeat=n)]


def fit_mle(data, links: Sequence[LinkSpec], kind: GeneratorKind = GAUSSIAN,
            opts: FitOptions | None = None, start: Theta | None = None) -> FitResult:
    """Maximum-likelihood fit of ``(mu, Sigma, lambda, tau)`` for a fixed generator.

    Without an explicit ``start`` the elliptical start is always tried; with
    ``opts.multistart`` one moment-based skewed start per sign pattern is tried as well and
    the highest log-likelihood wins.  A fit whose slant runs off toward the
    boundary ``|delta| = 1`` has no finite maximizer and is reported as not
    converged.
    """
    opts = opts or FitOptions()
    y = _values(data)
    m, n = y.shape
    if m < MIN_ROWS:
        raise ValueError(f"at least {MIN_ROWS} rows are needed, got {m}")
    if len(links) != n:
        raise ValueError(f"{n} columns but {len(links)} links")
    w = transform_data(y, links)
    jac = float(np.sum(log_jacobian(y, links)))
    chart = Chart(n, kind, opts.tau_fixed)
    if start is not None:
        starts = [start.replace(kind=kind)]
    else:
        starts = [_start(w, kind, opts.tau_fixed)]
        if opts.multistart:
            starts += [t for t in (_moment_start(w, kind, opts.tau_fixed, s) for s in _sign_patterns(n))
                       if t is not None]
    obj = _Objective(w, jac, chart)
    best = None
    for theta0 in starts:
        if opts.tau_fixed is not None:
            theta0 = theta0.replace(tau=float(opts.tau_fixed))
        try:
            out = _maximize(obj, chart.pack(theta0), opts)
        except ValueError as exc:
            logger.info("start skipped: %s", exc)
            continue
        if best is None or out[1] > best[1] + 1e-9:
            best = out
    if best is None:
        raise ValueError("log-likelihood is not finite at any starting point")
    x, ll, gnorm, iters, trace, msg = best
    theta = chart.unpack(x)
    converged = math.isfinite(ll) and gnorm <= opts.gradient_tolerance
    if theta.skew_scale > MAX_SKEW_SCALE:
        converged = False
        msg = f"{msg}; slant diverged toward the boundary |delta| = 1"
    logger.info("fit %s: loglik=%.10g |grad|=%.3g iters=%d (%s)", kind, ll, gnorm, iters, msg)
    se, ok = (None, False)
    if opts.compute_se:
        se, ok = _standard_errors_chart(obj, chart, x)
    return FitResult(theta, to_identifiable(theta), se, report_names(n, opts.tau_fixed is None),
                     float(ll), bool(converged), iters, None, trace, gnorm, msg, ok, opts.tau_fixed)


def _fit_one_nu(args):
    data, links, nu, opts = args
    return fit_mle(data, links, student(nu), opts)


def profile_nu(data, links: Sequence[LinkSpec], opts: FitOptions | None = None) -> FitResult:
    """Student fits over ``opts.nu_grid``; returns the best one with the profile attached."""
    opts = opts or FitOptions()
    y = _values(data)
    sub = replace(opts, compute_se=False, workers=1)
    jobs = [(y, list(links), nu, sub) for nu in opts.nu_grid]
    workers = max(1, min(opts.workers, len(jobs)))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            fits = list(ex.map(_fit_one_nu, jobs))
    else:
        fits = [_fit_one_nu(j) for j in jobs]
    lls = [f.loglik for f in fits]
    best = int(np.nanargmax(lls))
    result = fits[best]
    if opts.compute_se:
        se, ok = standard_errors(y, result.theta_hat, links, tau_free=opts.tau_fixed is None,
                                 return_flag=True)
        result.std_errors, result.hessian_ok = se, ok
    result.nu_profile = [(nu, ll) for nu, ll in zip(opts.nu_grid, lls)]
    return result


# --- standard errors --------------------------------------------------------------

def _hessian(obj: _Objective, x: np.ndarray, rel_step: float = 1e-5) -> np.ndarray:
    dim = x.size
    H = np.empty((dim, dim))
    for k in range(dim):
        h = rel_step * max(1.0, abs(x[k]))
        e = np.zeros(dim)
        e[k] = h
        H[:, k] = (obj.g(x + e) - obj.g(x - e)) / (2 * h)
    return 0.5 * (H + H.T)


def _report_jacobian(chart: Chart, x: np.ndarray, tau_free: bool, rel_step: float = 1e-6):
    dim = x.size
    cols = []
    for k in range(dim):
        h = rel_step * max(1.0, abs(x[k]))
        e = np.zeros(dim)
        e[k] = h
        hi = _report_vector(chart.unpack(x + e), tau_free)
        lo = _report_vector(chart.unpack(x - e), tau_free)
        cols.append((hi - lo) / (2 * h))
    return np.column_stack(cols)


def _standard_errors_chart(obj: _Objective, chart: Chart, x: np.ndarray):
    info = _hessian(obj, x)                  # Hessian of -loglik = observed information
    try:
        Lc = np.linalg.cholesky(info)
    except np.linalg.LinAlgError:
        warnings.warn("observed information is not positive definite; standard errors omitted",
                      RuntimeWarning, stacklevel=3)
        return None, False
    inv_L = np.linalg.inv(Lc)
    cov = inv_L.T @ inv_L
    J = _report_jacobian(chart, x, chart.tau_fixed is None)
    var = np.einsum("ij,jk,ik->i", J, cov, J)
    return np.sqrt(np.maximum(var, 0.0)), True


def standard_errors(data, theta_hat: Theta, links: Sequence[LinkSpec], tau_free: bool = True,
                    return_flag: bool = False):
    """Observed-information standard errors in the ``(mu, sigma, rho, lambda, tau)`` chart.

    Returns ``None`` (with a warning) when the observed information is not
    positive definite.  Names are given by :func:`report_names`.
    """
    y = _values(data)
    w = transform_data(y, links)
    chart = Chart(theta_hat.n, theta_hat.kind, None if tau_free else theta_hat.tau)
    obj = _Objective(np.atleast_2d(w), float(np.sum(log_jacobian(y, links))), chart)
    se, ok = _standard_errors_chart(obj, chart, chart.pack(theta_hat))
    return (se, ok) if return_flag else se
