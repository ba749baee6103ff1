import numpy as np
import pytest

from lppl.calibrate import FitConfig, TabooConfig, fit
from lppl.errors import CalibrationError, ValidationError
from lppl.forecast import ReplicaSpec, ScanPlan, forecast_tc, replica_ensemble, scan_windows, summarize, tc_density
from lppl.forecast.scan import replica_seed
from lppl.series import PriceSeries
from lppl.simulate import NoiseSpec, add_noise

FAST = FitConfig(taboo=TabooConfig(iterations=120, pool_size=10), top_k=3)


@pytest.fixture(scope="module")
def noisy(reference_series):
    return add_noise(reference_series, NoiseSpec(seed=17))


class TestScanPlan:
    def test_validation(self, noisy):
        with pytest.raises(ValidationError):
            ScanPlan((), 240.0)
        with pytest.raises(ValidationError):
            ScanPlan((250.0,), 240.0).validate(noisy)
        with pytest.raises(ValidationError):
            ScanPlan((220.0,), 240.0).validate(noisy)
        with pytest.raises(ValidationError):
            ScanPlan((0.0,), 240.0).validate(noisy)
        with pytest.raises(ValidationError):
            ScanPlan((1.0,), 260.0).validate(noisy)

    def test_round_trip(self):
        plan = ScanPlan((1, 21), 240, FAST)
        assert ScanPlan.from_dict(plan.to_dict()) == plan


class TestScanWindows:
    def test_single_window_equals_fit(self, noisy):
        assert scan_windows(noisy, ScanPlan((1.0,), 240.0, FAST)) == fit(noisy, FAST)

    def test_size_is_sum_over_windows_and_tags_are_windows(self, noisy):
        plan = ScanPlan((1.0, 41.0, 81.0), 240.0, FAST)
        ens = scan_windows(noisy, plan)
        per = [fit(noisy.window(t1, 240.0), FAST) for t1 in plan.t1_list]
        assert len(ens.fits) == sum(len(e.fits) for e in per)
        assert {f.provenance.window for f in ens.fits} == {(t1, 240.0) for t1 in plan.t1_list}

    def test_every_window_failing_raises(self):
        flat = PriceSeries(0.0, np.full(60, np.nan))
        with pytest.raises(CalibrationError):
            scan_windows(flat, ScanPlan((0.0,), 59.0, FAST))


class TestReplicas:
    def test_replicas_tagged_and_seeded(self, noisy):
        plan = ScanPlan((1.0,), 240.0, FAST)
        base = scan_windows(noisy, plan)
        reps = replica_ensemble(noisy, plan, base, ReplicaSpec(count=3, seed=2))
        assert {f.provenance.replica for f in reps.fits} <= {0, 1, 2}
        seeds = {f.provenance.replica: f.provenance.seed for f in reps.fits}
        for i, s in seeds.items():
            assert s == replica_seed(FAST.seed, 1.0, i)

    def test_replica_seeds_distinct(self):
        seeds = {replica_seed(0, t1, i) for t1 in (1, 21) for i in range(20)}
        assert len(seeds) == 40


@pytest.fixture(scope="module")
def forecast(noisy):
    return forecast_tc(noisy, ScanPlan((1.0,), 240.0, FAST), ReplicaSpec(count=4, seed=1))


class TestForecast:
    def test_density_normalised(self, forecast):
        d = forecast.density
        assert np.all(d.density >= 0)
        assert d.integral() == pytest.approx(1.0, abs=1e-6)

    def test_pool_is_qualified_fits(self, forecast):
        qualified = [f for f in forecast.ensemble.fits if f.qualification.passed]
        assert forecast.pooled == len(qualified)
        assert forecast.density.summary.n == len(qualified)

    def test_unqualified_pool_is_everything(self, noisy):
        fc = forecast_tc(noisy, ScanPlan((1.0,), 240.0, FAST), qualified_only=False)
        assert fc.pooled == len(fc.ensemble.fits)

    def test_order_independent_pooling(self, forecast):
        pool = [f for f in forecast.ensemble.fits if f.qualification.passed]
        d = tc_density(type(forecast.ensemble)(pool[::-1]))
        assert d.summary.median == forecast.density.summary.median
        np.testing.assert_allclose(d.density, forecast.density.density, rtol=1e-10, atol=1e-15)

    def test_deterministic(self, noisy, forecast):
        again = forecast_tc(noisy, ScanPlan((1.0,), 240.0, FAST), ReplicaSpec(count=4, seed=1))
        assert again.ensemble == forecast.ensemble
        np.testing.assert_array_equal(again.density.density, forecast.density.density)


class TestSummarize:
    def test_single_fit(self, noisy):
        ens = fit(noisy, FAST)
        one = type(ens)(ens.fits[:1])
        s = summarize(one)
        assert s["t_c"].mean == one.fits[0].params.t_c
        assert s["t_c"].std == 0.0

    def test_duplicated_ensemble_same_summary(self, noisy):
        ens = fit(noisy, FAST)
        doubled = type(ens)(ens.fits + ens.fits)
        a, b = summarize(ens), summarize(doubled)
        for k in a:
            assert a[k].mean == pytest.approx(b[k].mean, rel=1e-12)
            assert a[k].std == pytest.approx(b[k].std, rel=1e-9, abs=1e-12)
            assert (a[k].median, a[k].q05, a[k].q95) == (b[k].median, b[k].q05, b[k].q95)
