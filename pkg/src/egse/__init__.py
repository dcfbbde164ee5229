"""Multivariate extended G-skew-elliptical (EGSE) distributions.

Density evaluation, exact sampling, marginals and selection conditionals,
moments, KL divergence, maximum-likelihood fitting, goodness-of-fit
diagnostics and a Monte Carlo recovery harness.
"""

from .density import PsiTheta, Theta, bivariate_theta, egse_logpdf, ese_logpdf, from_identifiable, to_identifiable
from .elliptical import GAUSSIAN, GeneratorKind, parse_generator, student
from .links import LinkDomainError, LinkSpec, parse_link, parse_links
from .sampler import SampleBatch, acceptance_probability, sample_egse, sample_ese

__version__ = "0.1.0"

__all__ = [
    "Theta",
    "PsiTheta",
    "bivariate_theta",
    "egse_logpdf",
    "ese_logpdf",
    "to_identifiable",
    "from_identifiable",
    "GAUSSIAN",
    "GeneratorKind",
    "parse_generator",
    "student",
    "LinkSpec",
    "LinkDomainError",
    "parse_link",
    "parse_links",
    "SampleBatch",
    "sample_ese",
    "sample_egse",
    "acceptance_probability",
]
