import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lppl.calibrate import FitConfig, batch_objective, objective, slave_linear
from lppl.model import LpplParams, eval_lppl
from lppl.series import PriceSeries
from lppl.simulate import NoiseSpec, add_noise

from conftest import BENCH_PARAMS

TRUE3 = (300.0, 0.7, 10.0)
TRUE4 = (300.0, 0.7, 10.0, 1.0)


def sse_at(series, p):
    r = series.log_values() - eval_lppl(p, series.t)
    return float(r @ r)


class TestSlaveLinear:
    @pytest.mark.parametrize("mode,theta", [("four_linear", TRUE3), ("three_linear", TRUE4)])
    def test_recovers_linear_parameters(self, reference_series, mode, theta):
        res = slave_linear(theta, reference_series, mode)
        p = res.params
        assert p.A == pytest.approx(10.0, abs=1e-8)
        assert p.B == pytest.approx(-0.1, abs=1e-8)
        assert p.C == pytest.approx(0.02, abs=1e-8)
        assert p.phi == pytest.approx(1.0, abs=1e-8)
        assert res.sse < 1e-20

    def test_constant_series(self):
        s = PriceSeries(1.0, np.full(100, 3.5))
        p = slave_linear((150.0, 0.5, 8.0), s).params
        assert p.A == pytest.approx(3.5, abs=1e-10)
        assert abs(p.B) < 1e-10 and abs(p.C) < 1e-10

    def test_tc_inside_window_is_degenerate(self, reference_series):
        res = slave_linear((200.0, 0.7, 10.0), reference_series)
        assert res.degenerate and res.sse == math.inf and res.rmse == math.inf

    def test_collinear_regressors_degenerate(self, reference_series):
        # m = 0 makes the power-law column equal the intercept
        assert slave_linear((300.0, 0.0, 10.0), reference_series).degenerate

    def test_wrong_dimension(self, reference_series):
        assert slave_linear(TRUE4, reference_series, "four_linear").degenerate

    def test_four_linear_no_worse_than_any_fixed_phase(self, reference_series):
        noisy = add_noise(reference_series, NoiseSpec(seed=2))
        four = slave_linear((305.0, 0.6, 9.0), noisy).sse
        for phi in np.linspace(0, 2 * np.pi, 13):
            assert four <= slave_linear((305.0, 0.6, 9.0, phi), noisy, "three_linear").sse + 1e-9

    @given(st.floats(245, 400), st.floats(0.1, 0.9), st.floats(3, 20), st.integers(0, 2**16))
    def test_local_perturbation_never_helps(self, tc, m, omega, seed):
        base = PriceSeries(1.0, eval_lppl(BENCH_PARAMS, np.arange(1.0, 241.0)))
        noisy = add_noise(base, NoiseSpec(seed=seed))
        res = slave_linear((tc, m, omega, 0.5), noisy, "three_linear")
        p = res.params
        sse = sse_at(noisy, p)
        assert sse == pytest.approx(res.sse, rel=1e-9)
        for d in itertools.product((-1e-3, 0.0, 1e-3), repeat=3):
            q = LpplParams(p.t_c, p.m, p.omega, p.phi, p.A * (1 + d[0]), p.B * (1 + d[1]), p.C * (1 + d[2]))
            assert sse_at(noisy, q) >= sse * (1 - 1e-12)


class TestObjective:
    def test_zero_at_truth(self, reference_series):
        assert objective(TRUE3, reference_series, FitConfig()) < 1e-10
        cfg = FitConfig(objective="normalized_price_rmse")
        assert objective(TRUE3, reference_series, cfg) < 1e-10

    def test_normalized_matches_log_for_small_residuals(self, reference_series):
        rng = np.random.default_rng(8)
        tiny = reference_series.with_values(reference_series.values + 1e-4 * rng.standard_normal(240))
        lo = objective((301.0, 0.69, 10.1), tiny, FitConfig())
        no = objective((301.0, 0.69, 10.1), tiny, FitConfig(objective="normalized_price_rmse"))
        assert no == pytest.approx(lo, rel=2e-3)

    def test_tc_inside_window_is_inf(self, reference_series):
        assert objective((100.0, 0.5, 9.0), reference_series, FitConfig()) == math.inf


class TestBatchObjective:
    @pytest.mark.parametrize("mode", ["four_linear", "three_linear"])
    def test_matches_pointwise(self, reference_series, mode):
        noisy = add_noise(reference_series, NoiseSpec(seed=5))
        rng = np.random.default_rng(0)
        k = 50
        thetas = np.column_stack(
            [
                rng.uniform(241, 480, k),
                rng.uniform(0.01, 0.99, k),
                rng.uniform(2, 25, k),
                rng.uniform(0, 2 * np.pi, k),
            ]
        )[:, : 3 if mode == "four_linear" else 4]
        batch = batch_objective(thetas, noisy, mode, "log_rmse")
        single = [slave_linear(th, noisy, mode).rmse for th in thetas]
        np.testing.assert_allclose(batch, single, rtol=1e-7)

    def test_invalid_rows_are_inf(self, reference_series):
        thetas = np.array([[100.0, 0.5, 9.0], [np.nan, 0.5, 9.0], [300.0, 0.7, 10.0]])
        out = batch_objective(thetas, reference_series, "four_linear", "log_rmse")
        assert out[0] == math.inf and out[1] == math.inf
        assert out[2] < 1e-8
