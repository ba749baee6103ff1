import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lppl.calibrate.fit import FitResult, Provenance
from lppl.errors import ValidationError
from lppl.forecast import ReplicaSpec, ar1_replicas, block_permute, bootstrap_replicas, estimate_ar1, make_replicas
from lppl.forecast.replicas import ar1_noise
from lppl.model import FitBounds, eval_lppl, qualify
from lppl.series import PriceSeries

from conftest import BENCH_PARAMS


def ar1_series(rho, n, seed, sigma=1.0):
    rng = np.random.default_rng(seed)
    return ar1_noise(rho, sigma, n, rng)


def lag1(x):
    x = x - x.mean()
    return float(x[1:] @ x[:-1] / (x @ x))


def fake_fit(series, residuals, objective="log_rmse"):
    q = qualify(BENCH_PARAMS, FitBounds.default(series.t2, len(series)))
    prov = Provenance((series.t1, series.t2), 0, (300.0, 0.7, 10.0), 0, "converged", objective=objective)
    return FitResult(BENCH_PARAMS, float(np.sqrt(np.mean(residuals**2))), residuals, q, prov)


@pytest.fixture
def fitted_case():
    t = np.arange(1.0, 241.0)
    resid = 0.01 * ar1_series(0.6, 240, 7)
    series = PriceSeries(1.0, eval_lppl(BENCH_PARAMS, t) + resid)
    return series, fake_fit(series, resid)


class TestBlockPermute:
    @given(st.integers(1, 300), st.integers(1, 300), st.integers(0, 2**32 - 1))
    def test_is_a_permutation_of_whole_blocks(self, n, block_len, seed):
        if block_len > n:
            block_len = n
        r = np.arange(n, dtype=float)
        out = block_permute(r, block_len, np.random.default_rng(seed))
        np.testing.assert_array_equal(np.sort(out), r)
        # every block start is a multiple of block_len and the block is contiguous
        i = 0
        while i < n:
            start = int(out[i])
            assert start % block_len == 0
            length = min(block_len, n - start)
            np.testing.assert_array_equal(out[i : i + length], np.arange(start, start + length))
            i += length

    def test_block_longer_than_series(self):
        with pytest.raises(ValidationError):
            block_permute(np.zeros(10), 11, np.random.default_rng(0))


class TestBootstrapReplicas:
    def test_multiset_and_length_preserved(self, fitted_case):
        series, f = fitted_case
        curve = eval_lppl(BENCH_PARAMS, series.t)
        for rep in bootstrap_replicas(series, f, ReplicaSpec(count=30, seed=3)):
            assert len(rep) == len(series) and rep.t0 == series.t0
            np.testing.assert_allclose(np.sort(rep.values - curve), np.sort(f.residuals), atol=1e-14)

    def test_deterministic_and_seeded(self, fitted_case):
        series, f = fitted_case
        a = bootstrap_replicas(series, f, ReplicaSpec(count=3, seed=1))
        b = bootstrap_replicas(series, f, ReplicaSpec(count=3, seed=1))
        c = bootstrap_replicas(series, f, ReplicaSpec(count=3, seed=2))
        assert a == b
        assert a != c

    def test_block_length_list_cycles(self, fitted_case):
        series, f = fitted_case
        spec = ReplicaSpec(count=4, block_len=(10, 40))
        assert spec.block_lens == (10, 40)
        assert len(bootstrap_replicas(series, f, spec)) == 4

    def test_normalized_objective_residuals(self, fitted_case):
        series, _ = fitted_case
        curve = eval_lppl(BENCH_PARAMS, series.t)
        rel = -np.expm1(curve - series.values)
        f = fake_fit(series, rel, "normalized_price_rmse")
        rep = bootstrap_replicas(series, f, ReplicaSpec(count=1, block_len=240))[0]
        np.testing.assert_allclose(rep.values, series.values, atol=1e-12)

    def test_misaligned_fit(self, fitted_case):
        series, f = fitted_case
        with pytest.raises(ValidationError):
            bootstrap_replicas(series.window(2, 240), f, ReplicaSpec())

    def test_spec_validation(self):
        with pytest.raises(ValidationError):
            ReplicaSpec(count=0)
        with pytest.raises(ValidationError):
            ReplicaSpec(block_len=0)
        with pytest.raises(ValidationError):
            ReplicaSpec(method="wild")
        spec = ReplicaSpec("ar1", 5, (10, 20), 4)
        assert ReplicaSpec.from_dict(spec.to_dict()) == spec


class TestAr1:
    def test_estimate_recovers_rho(self):
        x = ar1_series(0.5, 50_000, 1, sigma=0.3)
        rho, sigma = estimate_ar1(x)
        assert rho == pytest.approx(0.5, abs=0.01)
        assert sigma == pytest.approx(0.3, rel=0.01)

    def test_estimator_error_shrinks_like_root_n(self):
        errs = {}
        for n in (100, 1000, 10_000):
            e = [estimate_ar1(ar1_series(0.6, n, s))[0] - 0.6 for s in range(200)]
            errs[n] = math.sqrt(np.mean(np.square(e)))
        for small, big in ((100, 1000), (1000, 10_000)):
            assert errs[small] / errs[big] == pytest.approx(math.sqrt(10), rel=0.25)

    def test_stationary_variance(self):
        x = ar1_series(0.8, 200_000, 2)
        assert x.var() == pytest.approx(1 / (1 - 0.64), rel=0.05)

    def test_replicas_share_curve_and_dependence(self, fitted_case):
        series, f = fitted_case
        curve = eval_lppl(BENCH_PARAMS, series.t)
        reps = ar1_replicas(series, f, ReplicaSpec("ar1", 50, seed=5))
        rho_hat, _ = estimate_ar1(f.residuals)
        rhos = [estimate_ar1(r.values - curve)[0] for r in reps]
        assert np.mean(rhos) == pytest.approx(rho_hat, abs=0.05)

    def test_nonstationary_rejected(self, fitted_case):
        series, _ = fitted_case
        walk = np.cumsum(np.ones(240))
        with pytest.raises(ValidationError):
            ar1_replicas(series, fake_fit(series, walk), ReplicaSpec("ar1"))

    def test_dispatch(self, fitted_case):
        series, f = fitted_case
        assert make_replicas(series, f, ReplicaSpec("ar1", 2)) == ar1_replicas(series, f, ReplicaSpec("ar1", 2))

    def test_short_residuals(self):
        with pytest.raises(ValidationError):
            estimate_ar1(np.zeros(2))
