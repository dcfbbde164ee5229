import math

import numpy as np
import pytest
from scipy import integrate, special, stats

from egse.elliptical import (
    GAUSSIAN,
    EllipticalParams,
    cholesky,
    conditional_skewing_cdf,
    conditional_skewing_cdf_quad,
    conditional_skewing_logcdf,
    elliptical_logpdf,
    log_generator_deriv_ratio,
    log_normalization_constant,
    mahalanobis,
    parse_generator,
    student,
    univariate_cdf,
    univariate_logcdf,
    univariate_logpdf,
)


def student_density_generator(nu, n, u):
    """Normalised Student generator ``c_n (1 + u/nu)^(-(nu+n)/2)``, written out directly."""
    logc = special.gammaln((nu + n) / 2) - special.gammaln(nu / 2) - n / 2 * math.log(nu * math.pi)
    return math.exp(logc - (nu + n) / 2 * math.log1p(u / nu))


class TestGeneratorKind:
    def test_parse(self):
        assert parse_generator("normal") is GAUSSIAN
        assert parse_generator("student:4").nu == 4.0
        with pytest.raises(ValueError):
            parse_generator("cauchy")

    @pytest.mark.parametrize("nu", [0.0, -1.0, math.inf])
    def test_invalid_nu(self, nu):
        with pytest.raises(ValueError):
            student(nu)


class TestJointDensity:
    def test_gaussian_matches_scipy(self, rng):
        a = rng.normal(size=(3, 3))
        S = a @ a.T + np.eye(3)
        p = EllipticalParams(rng.normal(size=3), S)
        x = rng.normal(size=(20, 3))
        np.testing.assert_allclose(elliptical_logpdf(x, p, GAUSSIAN),
                                   stats.multivariate_normal(p.mu, S).logpdf(x), rtol=1e-12)

    @pytest.mark.parametrize("nu", [1.0, 3.5, 30.0])
    def test_student_matches_scipy(self, rng, nu):
        S = np.array([[2.0, 0.6], [0.6, 1.0]])
        p = EllipticalParams([0.5, -1.0], S)
        x = rng.normal(scale=3, size=(20, 2))
        np.testing.assert_allclose(elliptical_logpdf(x, p, student(nu)),
                                   stats.multivariate_t(p.mu, S, df=nu).logpdf(x), rtol=1e-12)

    def test_mahalanobis(self):
        p = EllipticalParams([1.0, 0.0], [[4.0, 0.0], [0.0, 1.0]])
        assert mahalanobis(np.array([3.0, 1.0]), p) == pytest.approx(2.0)

    def test_normalization_constant_student_n1(self):
        nu = 5.0
        expected = math.log(math.sqrt(nu * math.pi) * special.gamma(nu / 2) / special.gamma((nu + 1) / 2))
        assert log_normalization_constant(student(nu), 1) == pytest.approx(expected, rel=1e-13)

    def test_deriv_ratio_is_log_derivative(self):
        from egse.elliptical import log_generator
        k = student(3.0)
        u, h = 1.7, 1e-6
        fd = (log_generator(k, 2, u + h) - log_generator(k, 2, u - h)) / (2 * h)
        assert log_generator_deriv_ratio(k, 2, u) == pytest.approx(fd, rel=1e-7)

    def test_cholesky_rejects_indefinite(self):
        with pytest.raises(np.linalg.LinAlgError):
            cholesky([[1.0, 2.0], [2.0, 1.0]])


class TestUnivariate:
    @pytest.mark.parametrize("nu", [0.7, 2.0, 15.0])
    def test_student_cdf_matches_scipy(self, nu):
        z = np.linspace(-30, 30, 61)
        np.testing.assert_allclose(univariate_cdf(student(nu), z), stats.t.cdf(z, nu), rtol=1e-12)
        np.testing.assert_allclose(univariate_logpdf(student(nu), z), stats.t.logpdf(z, nu), rtol=1e-12)

    def test_logcdf_deep_tail(self):
        assert univariate_logcdf(GAUSSIAN, -40.0) == pytest.approx(stats.norm.logcdf(-40.0), rel=1e-12)
        assert univariate_logcdf(student(3), -1e6) == pytest.approx(stats.t.logcdf(-1e6, 3), rel=1e-10)


class TestConditionalSkewingCDF:
    def test_gaussian_ignores_q(self):
        assert conditional_skewing_cdf(GAUSSIAN, 0.3, 12.0) == pytest.approx(stats.norm.cdf(0.3))

    def test_against_explicit_generator_ratio(self, rng):
        # oracle: int_{-inf}^x g2(s^2+q) ds / g1(q) with hand-written normalised generators
        for _ in range(10):
            x, q, nu = rng.normal(scale=2), rng.exponential(3), rng.uniform(0.5, 20)
            g1 = student_density_generator(nu, 1, q)
            num, _ = integrate.quad(lambda s: student_density_generator(nu, 2, s * s + q), -np.inf, x,
                                    epsabs=1e-13, epsrel=1e-12)
            assert conditional_skewing_cdf(student(nu), x, q) == pytest.approx(num / g1, abs=1e-8)

    def test_quadrature_helper_agrees(self):
        k = student(4.0)
        for x, q in [(-2.0, 0.1), (0.5, 3.0), (3.0, 40.0)]:
            assert conditional_skewing_cdf(k, x, q) == pytest.approx(
                conditional_skewing_cdf_quad(k, x, q), abs=1e-10)

    def test_higher_dimensional_base(self):
        # X of dimension 3: Z | X is t with nu+3 df and squared scale (nu+q)/(nu+3)
        nu, x, q = 2.5, 0.8, 1.9
        ref = stats.t.cdf(x / math.sqrt((nu + q) / (nu + 3)), nu + 3)
        assert conditional_skewing_cdf(student(nu), x, q, 3) == pytest.approx(ref, rel=1e-12)

    def test_log_version(self):
        k = student(6.0)
        assert conditional_skewing_logcdf(k, -3.0, 2.0) == pytest.approx(
            math.log(conditional_skewing_cdf(k, -3.0, 2.0)), rel=1e-12)

    def test_negative_q_rejected(self):
        with pytest.raises(ValueError):
            conditional_skewing_cdf(student(3), 0.0, -1.0)
