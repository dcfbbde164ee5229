import math
import warnings

import numpy as np
import pytest

from conftest import random_theta
from egse.density import Theta, bivariate_theta, egse_logpdf, to_identifiable
from egse.elliptical import GAUSSIAN, student
from egse.fit import (
    Chart,
    FitOptions,
    fit_mle,
    loglik_gradient,
    loglik_gradient_structured,
    loglikelihood,
    profile_nu,
    report_names,
    standard_errors,
)
from egse.links import LinkDomainError, parse_links
from egse.sampler import sample_egse

LOGIT2 = parse_links("logit,logit")
# logit-normal row of the Swiss application: mu1, mu2, lambda1, lambda2, sigma1, sigma2, rho
SWISS_TABLE = dict(mu1=-2.36, mu2=0.02, lam1=-0.14, lam2=-0.12, sigma1=0.89, sigma2=1.21, rho=-0.71)
SWISS_SE = dict(mu1=1.05, mu2=1.02, lambda1=3.02, lambda2=1.89, sigma1=0.09, sigma2=0.12, rho=0.02)


def swiss_table_theta():
    p = SWISS_TABLE
    return bivariate_theta(p["mu1"], p["mu2"], p["sigma1"], p["sigma2"], p["rho"], p["lam1"], p["lam2"], 0.0)


def precision_coordinates(theta):
    P = np.linalg.inv(theta.sigma)
    n = theta.n
    return np.concatenate([theta.mu, [P[i, j] for i in range(n) for j in range(i, n)], theta.lam, [theta.tau]])


def theta_from_precision(v, n, kind):
    mu = v[:n]
    k = n * (n + 1) // 2
    P = np.zeros((n, n))
    P[np.triu_indices(n)] = v[n:n + k]
    P = P + np.triu(P, 1).T
    return Theta(mu, np.linalg.inv(P), v[n + k:n + k + n], v[-1], kind)


def fd_gradient(y, theta, links, rel=1e-6):
    v = precision_coordinates(theta)
    out = np.empty_like(v)
    for k in range(v.size):
        h = rel * max(1.0, abs(v[k]))
        e = np.zeros_like(v)
        e[k] = h
        hi = loglikelihood(y, theta_from_precision(v + e, theta.n, theta.kind), links)
        lo = loglikelihood(y, theta_from_precision(v - e, theta.n, theta.kind), links)
        out[k] = (hi - lo) / (2 * h)
    return out


def report_vector(theta, tau=True):
    v = [*theta.mu, *theta.scales, theta.rho, *theta.lam]
    return np.array(v + [theta.tau] if tau else v)


class TestLoglikelihood:
    def test_is_sum_of_log_densities(self, rng, theta2):
        y = rng.uniform(0.05, 0.95, size=(30, 2))
        assert loglikelihood(y, theta2, LOGIT2) == pytest.approx(np.sum(egse_logpdf(y, theta2, LOGIT2)), rel=1e-13)

    def test_single_row(self, theta2):
        y = np.array([[0.3, 0.6]])
        assert loglikelihood(y, theta2, LOGIT2) == pytest.approx(egse_logpdf(y[0], theta2, LOGIT2), rel=1e-13)

    def test_accepts_dataset(self, swiss_logit):
        data, links = swiss_logit
        assert loglikelihood(data, swiss_table_theta(), links) == loglikelihood(data.values, swiss_table_theta(), links)


class TestGradient:
    @pytest.mark.parametrize("kind", [GAUSSIAN, student(4.0)])
    @pytest.mark.parametrize("n", [2, 3])
    def test_matches_finite_differences(self, rng, kind, n):
        for _ in range(3):
            t = random_theta(rng, n, kind, lam_scale=1.0)
            links = parse_links("logit", n)
            y = sample_egse(t, links, 60, rng=rng).values
            g = loglik_gradient(y, t, links)
            fd = fd_gradient(y, t, links)
            np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-5 * np.abs(fd).max())

    def test_symmetric_point(self, rng):
        # lambda = 0, tau = 0: only the finite-difference oracle is trusted for the slant component
        t = bivariate_theta(0.1, 0.2, 1.0, 1.3, 0.3)
        y = sample_egse(t, LOGIT2, 80, rng=rng).values
        np.testing.assert_allclose(loglik_gradient(y, t, LOGIT2), fd_gradient(y, t, LOGIT2), rtol=1e-5, atol=1e-6)

    def test_structured_mu_component(self, rng, theta2):
        y = sample_egse(theta2, LOGIT2, 40, rng=rng).values
        g_mu = loglik_gradient_structured(y, theta2, LOGIT2)[0]
        np.testing.assert_allclose(g_mu, loglik_gradient(y, theta2, LOGIT2)[:2])


class TestChart:
    def test_round_trip(self, rng):
        t = random_theta(rng, 3)
        for tau_fixed in (None, t.tau):
            c = Chart(3, GAUSSIAN, tau_fixed)
            back = c.unpack(c.pack(t))
            np.testing.assert_allclose(back.sigma, t.sigma, rtol=1e-12)
            np.testing.assert_allclose(back.lam, t.lam)
            assert c.dim == c.pack(t).size

    def test_chart_gradient(self, rng, theta2):
        y = sample_egse(theta2, LOGIT2, 50, rng=rng).values
        c = Chart(2, GAUSSIAN, None)
        x = c.pack(theta2)
        g = c.gradient(x, loglik_gradient_structured(y, theta2, LOGIT2))
        for k in range(x.size):
            e = np.zeros_like(x)
            e[k] = 1e-6
            fd = (loglikelihood(y, c.unpack(x + e), LOGIT2) - loglikelihood(y, c.unpack(x - e), LOGIT2)) / 2e-6
            assert g[k] == pytest.approx(fd, rel=1e-5, abs=1e-6)

    def test_report_names(self):
        assert report_names(2) == ("mu1", "mu2", "sigma1", "sigma2", "rho", "lambda1", "lambda2", "tau")
        assert "rho23" in report_names(3, False)


class TestSyntheticRecovery:
    TRUTH = bivariate_theta(0.5, -0.3, 1.0, 0.8, 0.4, 1.5, -1.0, 0.5)

    @pytest.mark.parametrize("seed", [100, 101, 102])
    def test_tau_fixed_within_three_se(self, seed):
        y = sample_egse(self.TRUTH, LOGIT2, 2000, seed=seed).values
        fit = fit_mle(y, LOGIT2, opts=FitOptions(tau_fixed=0.5))
        assert fit.converged and fit.hessian_ok
        z = (report_vector(fit.theta_hat, False) - report_vector(self.TRUTH, False)) / fit.std_errors
        assert np.all(np.abs(z) < 3), z
        assert fit.loglik >= loglikelihood(y, self.TRUTH, LOGIT2)

    def test_tau_free_within_three_se(self):
        # tau is weakly identified, so allow the occasional miss across ten data sets
        ok = 0
        for seed in range(100, 110):
            y = sample_egse(self.TRUTH, LOGIT2, 2000, seed=seed).values
            fit = fit_mle(y, LOGIT2)
            assert fit.converged
            assert np.max(np.abs(loglik_gradient(y, fit.theta_hat, LOGIT2))) <= 1e-4
            if fit.std_errors is not None:
                z = (report_vector(fit.theta_hat) - report_vector(self.TRUTH)) / fit.std_errors
                ok += bool(np.all(np.abs(z) < 3))
        assert ok >= 8

    @pytest.mark.parametrize("seed", [100, 101, 102])
    def test_standard_errors_shrink_like_root_m(self, seed):
        opts = FitOptions(tau_fixed=0.5)
        se = [fit_mle(sample_egse(self.TRUTH, LOGIT2, m, seed=seed).values, LOGIT2, opts=opts).std_errors
              for m in (500, 2000)]
        assert 1.6 <= np.median(se[0] / se[1]) <= 2.5

    def test_replicated_data_halves_standard_errors(self):
        y = sample_egse(self.TRUTH, LOGIT2, 400, seed=3).values
        opts = FitOptions(tau_fixed=0.5)
        a = fit_mle(y, LOGIT2, opts=opts)
        b = fit_mle(np.tile(y, (4, 1)), LOGIT2, opts=opts)
        np.testing.assert_allclose(b.std_errors, a.std_errors / 2, rtol=1e-3)

    def test_psi_is_exact_image(self):
        y = sample_egse(self.TRUTH, LOGIT2, 300, seed=5).values
        fit = fit_mle(y, LOGIT2, opts=FitOptions(tau_fixed=0.5, compute_se=False))
        psi = to_identifiable(fit.theta_hat)
        np.testing.assert_array_equal(fit.psi_hat.delta, psi.delta)
        assert fit.psi_hat.gamma == psi.gamma

    def test_trace_is_monotone(self):
        y = sample_egse(self.TRUTH, LOGIT2, 500, seed=6).values
        fit = fit_mle(y, LOGIT2, opts=FitOptions(compute_se=False, multistart=False))
        ll = np.array(fit.trace)
        assert np.all(np.diff(ll) >= -1e-12 * np.abs(ll[1:]).max())

    def test_standard_errors_function(self):
        y = sample_egse(self.TRUTH, LOGIT2, 1000, seed=7).values
        fit = fit_mle(y, LOGIT2, opts=FitOptions(tau_fixed=0.5))
        se = standard_errors(y, fit.theta_hat, LOGIT2, tau_free=False)
        np.testing.assert_allclose(se, fit.std_errors, rtol=1e-6)


class TestGuards:
    def test_too_few_rows(self, theta2):
        with pytest.raises(ValueError, match="at least"):
            fit_mle(np.full((5, 2), 0.5), LOGIT2)

    def test_domain_error_names_row(self):
        y = np.full((20, 2), 0.5) + np.linspace(-0.1, 0.1, 20)[:, None] * [1, -1]
        y[13, 1] = 1.0
        with pytest.raises(LinkDomainError, match="row 14, coordinate 2"):
            fit_mle(y, LOGIT2)

    def test_non_pd_information_warns(self, swiss_logit):
        data, links = swiss_logit
        with pytest.warns(RuntimeWarning, match="not positive definite"):
            fit = fit_mle(data, links, opts=FitOptions(tau_fixed=0.0, multistart=False))
        assert fit.std_errors is None and not fit.hessian_ok

    def test_half_space_data_is_not_converged(self):
        # W truncated to w1 > 0.3 is the |delta| -> 1 limit of the family: no finite maximizer
        rng = np.random.default_rng(5)
        w = rng.standard_normal((4000, 2))
        y = 1.0 / (1.0 + np.exp(-w[w[:, 0] > 0.3][:1000]))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            fit = fit_mle(y, LOGIT2, opts=FitOptions(compute_se=False))
        assert not fit.converged
        assert "boundary" in fit.message

    def test_options_validation(self):
        with pytest.raises(ValueError):
            FitOptions(max_iter=0)
        with pytest.raises(ValueError):
            FitOptions(gradient_tolerance=0.0)


@pytest.fixture(scope="module")
def fits(swiss_logit):
    """Multistart fit and elliptical-start fit of the Swiss data."""
    data, links = swiss_logit
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        best = fit_mle(data, links, opts=FitOptions(tau_fixed=0.0))
        plain = fit_mle(data, links, opts=FitOptions(tau_fixed=0.0, multistart=False))
    return best, plain


class TestSwiss:
    """Education and agriculture proportions with logit links and tau fixed at 0."""

    def test_table_point_loglik(self, swiss_logit, fits):
        data, links = swiss_logit
        ref = loglikelihood(data, swiss_table_theta(), links)
        best, plain = fits
        assert best.loglik >= ref - 1e-6 and plain.loglik >= ref - 1e-6
        assert best.loglik - ref <= 2.0 + (best.loglik - plain.loglik)

    def test_elliptical_start_matches_table(self, fits):
        t = fits[1].theta_hat
        p = SWISS_TABLE
        assert fits[1].converged
        np.testing.assert_allclose([*t.mu, *t.scales, t.rho], [p["mu1"], p["mu2"], p["sigma1"], p["sigma2"], p["rho"]],
                                   atol=0.15)
        np.testing.assert_allclose(t.lam, [p["lam1"], p["lam2"]], atol=0.5)

    def test_multistart_finds_higher_mode(self, fits):
        best, plain = fits
        assert best.converged and best.loglik > plain.loglik + 3.0
        assert np.all(best.theta_hat.lam < -1.0)

    def test_perturbed_start_reaches_same_loglik(self, swiss_logit, fits):
        data, links = swiss_logit
        t = fits[0].theta_hat
        start = t.replace(mu=t.mu + [0.2, -0.3], lam=t.lam * 0.7)
        again = fit_mle(data, links, opts=FitOptions(tau_fixed=0.0, compute_se=False), start=start)
        assert again.loglik == pytest.approx(fits[0].loglik, abs=1e-4)

    @pytest.mark.xfail(strict=True, reason="standard errors at the global mode differ from the reference ones")
    def test_standard_errors_same_order_as_reference(self, fits):
        se = fits[0].se_dict()
        assert all(SWISS_SE[k] / 3 <= se[k] <= 3 * SWISS_SE[k] for k in SWISS_SE)

    @pytest.mark.slow
    def test_profile_nu(self, swiss_logit):
        data, links = swiss_logit
        fit = profile_nu(data, links, FitOptions(tau_fixed=0.0))
        assert 14 <= fit.theta_hat.kind.nu <= 34
        assert len(fit.nu_profile) == 50


class TestProfile:
    def test_single_point_grid_equals_fit(self, swiss_logit):
        data, links = swiss_logit
        opts = FitOptions(tau_fixed=0.0, nu_grid=(7,), compute_se=False)
        a = profile_nu(data, links, opts)
        b = fit_mle(data, links, student(7.0), opts)
        assert a.loglik == b.loglik
        np.testing.assert_array_equal(a.theta_hat.lam, b.theta_hat.lam)

    @pytest.mark.slow
    def test_recovers_student_nu(self):
        t = bivariate_theta(0.5, -0.3, 1.0, 0.8, 0.4, 1.5, -1.0, 0.5, student(5.0))
        y = sample_egse(t, LOGIT2, 2000, seed=1).values
        fit = profile_nu(y, LOGIT2, FitOptions(tau_fixed=0.5, nu_grid=range(1, 16), compute_se=False))
        assert 3 <= fit.theta_hat.kind.nu <= 9
