"""Monte Carlo recovery study for bivariate EGSE maximum-likelihood fits.

For every ``(sample size, rho)`` cell, ``N`` data sets are simulated from the
true model, each is refitted with :func:`egse.fit.fit_mle`, and relative bias
``mean |(est - true) / true|`` and root mean square error
``sqrt(mean (est - true)^2)`` are computed per parameter.  Replications whose
fit does not converge are excluded from the aggregates and counted.

Replication ``r`` of cell ``(a, b)`` draws from the random stream keyed by
``(base_seed, a, b, r)``, so the report is identical for any worker count.
"""

from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .density import Theta, bivariate_theta
from .elliptical import GAUSSIAN, GeneratorKind
from .fit import FitOptions, fit_mle
from .links import LinkSpec, parse_links
from .sampler import make_rng, sample_egse

__all__ = [
    "StudyScenario",
    "StudyReport",
    "CellResult",
    "aggregate",
    "run_study",
    "PARAMS",
    "reference_truth",
    "default_workers",
]

logger = logging.getLogger(__name__)

PARAMS = ("mu1", "mu2", "lambda1", "lambda2", "tau", "sigma1", "sigma2", "rho")
DEFAULT_SIZES = (200, 500, 1000, 2000)
DEFAULT_RHOS = (0.10, 0.25, 0.50, 0.75, 0.90)


def reference_truth(rho: float = 0.5, kind: GeneratorKind = GAUSSIAN) -> Theta:
    """True vector of the reference scenario: mu=(1,1), lambda=(0.5,0.6), tau=0.5, sigma=(1,1)."""
    return bivariate_theta(1.0, 1.0, 1.0, 1.0, rho, 0.5, 0.6, 0.5, kind)


def default_workers() -> int:
    env = os.environ.get("EGSE_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _param_vector(theta: Theta) -> np.ndarray:
    s = theta.scales
    return np.array([theta.mu[0], theta.mu[1], theta.lam[0], theta.lam[1], theta.tau,
                     s[0], s[1], theta.rho])


@dataclass(frozen=True)
class StudyScenario:
    """Study design.  ``true_theta`` supplies everything except ``rho``, which is swept."""

    true_theta: Theta = field(default_factory=reference_truth)
    links: tuple = field(default_factory=lambda: tuple(parse_links("tanprobit,tanprobit")))
    sample_sizes: tuple = DEFAULT_SIZES
    rho_values: tuple = DEFAULT_RHOS
    replications: int = 100
    base_seed: int = 0
    fit_options: FitOptions = field(default_factory=lambda: FitOptions(compute_se=False))
    workers: int = 1

    def __post_init__(self):
        if self.true_theta.n != 2:
            raise ValueError("the study is bivariate")
        if self.replications < 2:
            raise ValueError("at least 2 replications are needed")
        if any(s < 50 for s in self.sample_sizes):
            raise ValueError("sample sizes must be >= 50")
        if any(not -1 < r < 1 for r in self.rho_values):
            raise ValueError("rho values must lie in (-1, 1)")
        object.__setattr__(self, "links", tuple(self.links))
        object.__setattr__(self, "sample_sizes", tuple(int(s) for s in self.sample_sizes))
        object.__setattr__(self, "rho_values", tuple(float(r) for r in self.rho_values))

    def theta_for(self, rho: float) -> Theta:
        t = self.true_theta
        s = t.scales
        return bivariate_theta(t.mu[0], t.mu[1], s[0], s[1], rho, t.lam[0], t.lam[1], t.tau, t.kind)


@dataclass(frozen=True)
class CellResult:
    size: int
    rho: float
    rb: dict
    rmse: dict
    bias: dict
    failures: int
    valid: bool


@dataclass
class StudyReport:
    cells: list

    def rows(self) -> list[dict]:
        out = []
        for c in self.cells:
            for p in PARAMS:
                out.append({"size": c.size, "rho": c.rho, "param": p, "rb": c.rb.get(p, math.nan),
                            "rmse": c.rmse.get(p, math.nan), "failures": c.failures})
        return out

    def cell(self, size: int, rho: float) -> CellResult:
        for c in self.cells:
            if c.size == size and math.isclose(c.rho, rho):
                return c
        raise KeyError((size, rho))

    def mean_rb(self, size: int, rho: float) -> float:
        c = self.cell(size, rho)
        return float(np.mean([c.rb[p] for p in PARAMS])) if c.valid else math.nan

    def to_csv(self, path):
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, ["size", "rho", "param", "rb", "rmse", "failures"],
                               lineterminator="\n")
            w.writeheader()
            for r in self.rows():
                w.writerow({**r, "rb": format(r["rb"], ".17g"), "rmse": format(r["rmse"], ".17g")})


def aggregate(estimates, truth) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """RB, RMSE and signed bias of a ``(replications, params)`` array of estimates."""
    est = np.atleast_2d(np.asarray(estimates, dtype=float))
    truth = np.asarray(truth, dtype=float)
    err = est - truth
    with np.errstate(divide="ignore", invalid="ignore"):
        rb = np.mean(np.abs(err / truth), axis=0)
    return rb, np.sqrt(np.mean(err * err, axis=0)), np.mean(err, axis=0)


def _replicate(args):
    theta, links, size, seed_key, opts = args
    rng = make_rng(*seed_key)
    y = sample_egse(theta, links, size, rng=rng).values
    try:
        fit = fit_mle(y, links, theta.kind, opts)
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        logger.info("replication %s failed: %s", seed_key, exc)
        return None
    if not fit.converged:
        return None
    return _param_vector(fit.theta_hat)


def run_study(scenario: StudyScenario) -> StudyReport:
    """Simulate, refit and aggregate every cell of the scenario."""
    jobs, index = [], []
    for a, size in enumerate(scenario.sample_sizes):
        for b, rho in enumerate(scenario.rho_values):
            theta = scenario.theta_for(rho)
            for r in range(scenario.replications):
                jobs.append((theta, scenario.links, size, (scenario.base_seed, a, b, r),
                             scenario.fit_options))
                index.append((a, b))
    if scenario.workers > 1:
        with ProcessPoolExecutor(max_workers=scenario.workers) as ex:
            results = list(ex.map(_replicate, jobs, chunksize=4))
    else:
        results = [_replicate(j) for j in jobs]

    cells = []
    for a, size in enumerate(scenario.sample_sizes):
        for b, rho in enumerate(scenario.rho_values):
            est = [res for res, key in zip(results, index) if key == (a, b) and res is not None]
            failures = scenario.replications - len(est)
            truth = _param_vector(scenario.theta_for(rho))
            if not est:
                nan = {p: math.nan for p in PARAMS}
                cells.append(CellResult(size, rho, nan, dict(nan), dict(nan), failures, False))
                continue
            rb, rmse, bias = aggregate(np.array(est), truth)
            cells.append(CellResult(size, rho, dict(zip(PARAMS, rb.tolist())),
                                    dict(zip(PARAMS, rmse.tolist())),
                                    dict(zip(PARAMS, bias.tolist())), failures, True))
    return StudyReport(cells)
