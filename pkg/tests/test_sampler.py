import math

import numpy as np
import pytest
from scipy import integrate, stats

from egse.density import Theta, bivariate_theta, ese_logpdf
from egse.elliptical import student
from egse.links import parse_links
from egse.sampler import (
    LowAcceptanceWarning,
    SamplerProgressError,
    acceptance_probability,
    make_rng,
    sample_egse,
    sample_elliptical,
    sample_ese,
)


def numeric_cdf(theta):
    """CDF of a univariate ESE law: quadrature on a fine grid, linear in between."""
    f = lambda x: math.exp(ese_logpdf(np.array([x]), theta))
    grid = np.linspace(-12, 12, 1201)
    pieces = [integrate.quad(f, -np.inf, grid[0])[0]]
    pieces += [integrate.quad(f, a, b)[0] for a, b in zip(grid[:-1], grid[1:])]
    cdf = np.cumsum(pieces)
    return lambda x: np.interp(x, grid, cdf)


class TestAcceptance:
    @pytest.mark.parametrize("tau", [-1.0, 0.0, 0.5, 2.0])
    @pytest.mark.parametrize("lam", [(0.0, 0.0), (1.0, -2.0), (3.0, 3.0)])
    def test_rate_matches_probability(self, tau, lam):
        t = bivariate_theta(0, 0, 1.0, 1.5, 0.3, *lam, tau)
        b = sample_ese(t, 20_000, seed=11)
        p = acceptance_probability(t)
        se = math.sqrt(p * (1 - p) / b.proposed)
        assert abs(b.acceptance_rate - p) < 3 * se

    def test_tau_zero_is_one_half(self):
        for kind in (None, student(2.5)):
            t = bivariate_theta(0, 0, 1, 1, 0.5, 4.0, -1.0, 0.0, *(kind,) if kind else ())
            assert acceptance_probability(t) == 0.5

    def test_probability_formula(self):
        t = bivariate_theta(0, 0, 1.0, 2.0, 0.0, 1.0, 1.0, 1.0)
        assert acceptance_probability(t) == pytest.approx(stats.norm.cdf(1.0 / math.sqrt(6.0)))

    def test_bookkeeping(self):
        b = sample_ese(bivariate_theta(0, 0, 1, 1, 0, 1, 1, -0.5), 777, seed=2)
        assert b.values.shape == (777, 2)
        assert b.accepted == 777 and b.proposed >= 777

    def test_rare_selection_errors(self):
        t = Theta([0.0], [[1.0]], [0.0], -4.0)
        with pytest.raises(SamplerProgressError, match="increase tau"):
            sample_ese(t, 10, seed=0)

    def test_low_acceptance_warns(self):
        t = Theta([0.0], [[1.0]], [0.0], -2.6)
        with pytest.warns(LowAcceptanceWarning):
            sample_ese(t, 5, seed=0)


class TestDistribution:
    def test_skew_normal_ks(self):
        t = Theta([0.5], [[4.0]], [1.5], 0.0)
        y = sample_ese(t, 20_000, seed=5).values[:, 0]
        assert stats.kstest(y, stats.skewnorm(3.0, loc=0.5, scale=2.0).cdf).pvalue > 0.01

    @pytest.mark.parametrize("kind", [None, student(4.0)])
    def test_extended_ks_against_quadrature(self, kind):
        t = Theta([0.0], [[1.0]], [2.0], 0.7, *(kind,) if kind else ())
        y = sample_ese(t, 4000, seed=8).values[:, 0]
        assert stats.kstest(y, numeric_cdf(t)).pvalue > 0.01

    def test_student_uses_one_mixing_variable(self):
        # with a shared chi-square, lambda = 0 and tau = 0 give the multivariate t
        t = bivariate_theta(0, 0, 1, 1, 0.0, 0.0, 0.0, 0.0, student(3.0))
        x = sample_ese(t, 40_000, seed=4).values
        r2 = np.sum(x * x, axis=1) / 2
        assert stats.kstest(r2, stats.f(2, 3).cdf).pvalue > 0.01

    def test_elliptical_draws_are_unselected(self):
        t = bivariate_theta(1, -1, 1, 2, 0.5, 5.0, 5.0, -1.0)
        x = sample_elliptical(t, 50_000, seed=1)
        np.testing.assert_allclose(x.mean(axis=0), [1, -1], atol=0.05)


class TestReproducibility:
    def test_same_seed_same_draws(self, theta2):
        a = sample_ese(theta2, 500, seed=42)
        b = sample_ese(theta2, 500, seed=42)
        np.testing.assert_array_equal(a.values, b.values)
        assert a.proposed == b.proposed

    def test_different_seed(self, theta2):
        assert not np.array_equal(sample_ese(theta2, 10, seed=1).values, sample_ese(theta2, 10, seed=2).values)

    def test_keyed_streams_independent(self):
        a = make_rng(3, 0, 1).standard_normal(5)
        b = make_rng(3, 1, 0).standard_normal(5)
        assert not np.allclose(a, b)
        np.testing.assert_array_equal(a, make_rng(3, 0, 1).standard_normal(5))

    def test_egse_is_transformed_ese(self, theta2):
        links = parse_links("logit,tanprobit")
        w = sample_ese(theta2, 300, seed=9)
        y = sample_egse(theta2, links, 300, seed=9)
        np.testing.assert_allclose(links[0].forward(y.values[:, 0]), w.values[:, 0], rtol=1e-10)
        assert (y.accepted, y.proposed) == (w.accepted, w.proposed)
        assert np.all((y.values > 0) & (y.values < 1))

    def test_bad_size(self, theta2):
        with pytest.raises(ValueError):
            sample_ese(theta2, 0, seed=1)
