import csv
import math

import numpy as np
import pytest

from egse.fit import FitOptions
from egse.mcstudy import PARAMS, StudyScenario, aggregate, default_workers, reference_truth, run_study


@pytest.fixture(scope="module")
def tiny():
    return StudyScenario(sample_sizes=(80, 160), rho_values=(0.5,), replications=3, base_seed=7,
                         fit_options=FitOptions(compute_se=False, max_iter=200))


@pytest.fixture(scope="module")
def tiny_report(tiny):
    return run_study(tiny)


class TestAggregate:
    def test_exact_estimates(self):
        truth = np.array([1.0, -2.0, 0.5])
        rb, rmse, bias = aggregate(np.tile(truth, (4, 1)), truth)
        assert np.all(rb == 0) and np.all(rmse == 0) and np.all(bias == 0)

    def test_plus_minus_one(self):
        truth = np.array([2.0, -0.5, 4.0])
        rb, rmse, bias = aggregate(np.array([truth + 1, truth - 1]), truth)
        np.testing.assert_allclose(rmse, 1.0)
        np.testing.assert_allclose(rb, 1 / np.abs(truth))
        np.testing.assert_allclose(bias, 0.0)

    def test_zero_truth_gives_inf(self):
        rb, _, _ = aggregate([[0.1], [0.2]], [0.0])
        assert math.isinf(rb[0])


class TestScenario:
    def test_reference_truth(self):
        t = reference_truth(0.25)
        assert (*t.mu, *t.lam, t.tau, *t.scales) == pytest.approx((1, 1, 0.5, 0.6, 0.5, 1, 1))
        assert t.rho == pytest.approx(0.25)

    def test_theta_for_sweeps_rho_only(self, tiny):
        t = tiny.theta_for(0.9)
        assert t.rho == pytest.approx(0.9)
        np.testing.assert_array_equal(t.lam, tiny.true_theta.lam)

    @pytest.mark.parametrize("bad", [dict(replications=1), dict(sample_sizes=(20,)), dict(rho_values=(1.0,))])
    def test_validation(self, bad):
        with pytest.raises(ValueError):
            StudyScenario(**bad)

    def test_worker_env(self, monkeypatch):
        monkeypatch.setenv("EGSE_THREADS", "3")
        assert default_workers() == 3


class TestRunStudy:
    def test_cells(self, tiny_report):
        assert [(c.size, c.rho) for c in tiny_report.cells] == [(80, 0.5), (160, 0.5)]
        for c in tiny_report.cells:
            assert 0 <= c.failures <= 3
            if c.valid:
                assert set(c.rb) == set(PARAMS)
                assert all(v >= 0 for v in c.rmse.values())

    def test_reproducible(self, tiny, tiny_report):
        again = run_study(tiny)
        for a, b in zip(tiny_report.cells, again.cells):
            assert a.failures == b.failures
            assert a.rb == b.rb

    def test_worker_count_irrelevant(self, tiny, tiny_report):
        from dataclasses import replace
        par = run_study(replace(tiny, workers=2))
        for a, b in zip(tiny_report.cells, par.cells):
            assert a.rmse == b.rmse

    def test_csv(self, tiny_report, tmp_path):
        tiny_report.to_csv(tmp_path / "s.csv")
        rows = list(csv.DictReader(open(tmp_path / "s.csv")))
        assert len(rows) == 2 * len(PARAMS)
        assert rows[0]["param"] == "mu1"
        c = tiny_report.cell(80, 0.5)
        assert float(rows[0]["rb"]) == c.rb["mu1"] or math.isnan(c.rb["mu1"])

    def test_mean_rb(self, tiny_report):
        c = tiny_report.cell(160, 0.5)
        if c.valid:
            assert tiny_report.mean_rb(160, 0.5) == pytest.approx(np.mean([c.rb[p] for p in PARAMS]))
        with pytest.raises(KeyError):
            tiny_report.cell(999, 0.5)

    def test_failed_replications_counted(self):
        sc = StudyScenario(sample_sizes=(60,), rho_values=(0.1,), replications=2,
                           fit_options=FitOptions(compute_se=False, max_iter=1, multistart=False))
        c = run_study(sc).cells[0]
        assert c.failures == 2 and not c.valid and math.isnan(c.rb["tau"])
