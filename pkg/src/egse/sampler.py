"""Exact sampling by the selection (rejection) representation.

``(Z, X)`` is drawn jointly from the ``(n+1)``-dimensional elliptical law with
block-diagonal dispersion ``diag(1, Sigma)`` and ``X`` is kept whenever
``lambda'(X - mu) + tau > Z``.  For the Student family the pair is built as a
single scale mixture, so ``Z`` and ``X`` are uncorrelated but dependent.

Random streams come from :class:`numpy.random.SeedSequence`, so a stream is
a pure function of ``(seed, *keys)`` and streams for distinct keys do not
overlap.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .density import Theta
from .elliptical import univariate_cdf
from .links import LinkSpec

__all__ = [
    "SampleBatch",
    "SamplerProgressError",
    "LowAcceptanceWarning",
    "make_rng",
    "acceptance_probability",
    "sample_ese",
    "sample_egse",
    "sample_elliptical",
]

logger = logging.getLogger(__name__)

MIN_ACCEPTANCE = 1e-4
WARN_ACCEPTANCE = 1e-2
PROGRESS_CHECK = 100_000


class SamplerProgressError(RuntimeError):
    """Selection event too rare for plain rejection sampling."""


class LowAcceptanceWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class SampleBatch:
    values: np.ndarray
    accepted: int
    proposed: int
    seed: int | None

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.proposed


def make_rng(seed: int | None, *keys: int) -> np.random.Generator:
    """Generator for the stream identified by ``seed`` and integer ``keys``."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(k) for k in keys))
    return np.random.default_rng(ss)


def acceptance_probability(theta: Theta) -> float:
    """``P(lambda'(X - mu) + tau > Z)``."""
    return float(univariate_cdf(theta.kind, theta.tau / theta.skew_scale))


def _propose(theta: Theta, size: int, rng: np.random.Generator):
    n = theta.n
    u = rng.standard_normal((size, n + 1))
    if not theta.kind.is_gaussian:
        s = rng.chisquare(theta.kind.nu, size)
        u /= np.sqrt(s / theta.kind.nu)[:, None]
    z = u[:, 0]
    x = theta.mu + u[:, 1:] @ theta.chol.T
    return z, x


def sample_elliptical(theta: Theta, m: int, seed: int | None = None,
                      rng: np.random.Generator | None = None) -> np.ndarray:
    """Unconditioned draws of ``X`` (no selection), for comparison tests."""
    rng = rng if rng is not None else make_rng(seed)
    return _propose(theta, m, rng)[1]


def sample_ese(theta: Theta, m: int, seed: int | None = None,
               rng: np.random.Generator | None = None) -> SampleBatch:
    """Draw ``m`` rows from ``ESE_n(mu, Sigma, lambda, tau)``.

    ``proposed`` counts candidates up to and including the one that produced
    the ``m``-th acceptance.
    """
    if m < 1:
        raise ValueError("sample size must be >= 1")
    p = acceptance_probability(theta)
    if p < MIN_ACCEPTANCE:
        raise SamplerProgressError(
            f"selection probability {p:.3g} is below {MIN_ACCEPTANCE:g}; "
            "increase tau so the selection event is less rare"
        )
    if p < WARN_ACCEPTANCE:
        warnings.warn(f"selection probability is only {p:.3g}; sampling will be slow",
                      LowAcceptanceWarning, stacklevel=2)
    rng = rng if rng is not None else make_rng(seed)

    chunks = []
    accepted = proposed = 0
    while accepted < m:
        need = m - accepted
        size = int(min(max(1.2 * need / p + 64, 256), 2_000_000))
        z, x = _propose(theta, size, rng)
        keep = (x - theta.mu) @ theta.lam + theta.tau > z
        idx = np.flatnonzero(keep)
        if idx.size >= need:
            idx = idx[:need]
            proposed += int(idx[-1]) + 1
        else:
            proposed += size
        chunks.append(x[idx])
        accepted += idx.size
        if proposed >= PROGRESS_CHECK and accepted / proposed < MIN_ACCEPTANCE:
            raise SamplerProgressError(
                f"only {accepted} acceptances in {proposed} proposals; increase tau"
            )
    values = np.concatenate(chunks, axis=0)
    logger.debug("sample_ese: %d accepted / %d proposed", accepted, proposed)
    return SampleBatch(values, accepted, proposed, seed)


def sample_egse(theta: Theta, links: Sequence[LinkSpec], m: int, seed: int | None = None,
                rng: np.random.Generator | None = None) -> SampleBatch:
    """Draw ``m`` rows from ``EGSE_n`` by pushing ESE draws through ``G_i^{-1}``."""
    if len(links) != theta.n:
        raise ValueError(f"expected {theta.n} links, got {len(links)}")
    batch = sample_ese(theta, m, seed=seed, rng=rng)
    y = np.empty_like(batch.values)
    for i, link in enumerate(links):
        y[:, i] = link.inverse(batch.values[:, i])
    return SampleBatch(y, batch.accepted, batch.proposed, seed)
