import math

import numpy as np
import pytest
from scipy import integrate, stats

from lppl.errors import DomainError, ValidationError
from lppl.model import HazardParams, LpplParams, eval_hazard, eval_lppl, hazard_margin, to_hazard_params
from lppl.series import PriceSeries
from lppl.simulate import (
    NoiseSpec,
    SdeParams,
    add_noise,
    crash_probability,
    generate_reference,
    path_seed,
    simulate_jls,
    simulate_jls_ensemble,
)

from conftest import BENCH_PARAMS


def constant_hazard(rate, t_c=1e6):
    # m = 1 and no oscillation: h(t) = B'
    return HazardParams(t_c=t_c, m=1.0, omega=5.0, B_prime=rate, C_prime=0.0, phi_prime=0.0, kappa=0.2)


class TestReference:
    def test_values(self, reference_series):
        s = reference_series
        assert len(s) == 240
        assert s.t[0] == 1.0 and s.t[-1] == 240.0
        assert s.values[0] == pytest.approx(5.518, abs=5e-4)
        assert s.values[-1] == pytest.approx(8.024112335531498, abs=1e-12)
        np.testing.assert_array_equal(s.values, eval_lppl(BENCH_PARAMS, s.t))

    def test_maximum_is_inside_the_window(self, reference_series):
        i = int(np.argmax(reference_series.values))
        assert reference_series.t[i] == 213.0
        assert reference_series.values[i] == pytest.approx(8.153541932903048, abs=1e-12)

    def test_window_reaching_tc(self):
        with pytest.raises(DomainError):
            generate_reference(BENCH_PARAMS, 300, 1.0)

    def test_n_positive(self):
        with pytest.raises(ValidationError):
            generate_reference(BENCH_PARAMS, 0)


class TestNoise:
    def test_std_is_relative_to_max(self, reference_series):
        big = generate_reference(BENCH_PARAMS, 240, 1.0)
        noisy = add_noise(big, NoiseSpec("gaussian", 0.05, seed=3))
        eps = noisy.values - big.values
        assert eps.std() == pytest.approx(0.05 * 8.153541932903048, rel=0.15)

    def test_gaussian_std_million_draws(self):
        flat = PriceSeries(0.0, np.ones(1_000_000))
        eps = add_noise(flat, NoiseSpec("gaussian", 0.1, seed=1)).values - 1.0
        assert eps.std() == pytest.approx(0.1, rel=0.005)

    def test_student_t_std_and_heavy_tails(self):
        flat = PriceSeries(0.0, np.ones(1_000_000))
        eps = add_noise(flat, NoiseSpec("student_t4", 0.1, seed=1)).values - 1.0
        assert eps.std() == pytest.approx(0.1, rel=0.01)
        assert stats.kurtosis(eps) > 3.0

    def test_deterministic(self, reference_series):
        a = add_noise(reference_series, NoiseSpec(seed=9))
        b = add_noise(reference_series, NoiseSpec(seed=9))
        c = add_noise(reference_series, NoiseSpec(seed=10))
        assert a == b
        assert a != c

    def test_raw_scale_rejected(self):
        with pytest.raises(ValidationError):
            add_noise(PriceSeries(0, [1.0, 2.0], "raw"), NoiseSpec())

    def test_bad_spec(self):
        with pytest.raises(ValidationError):
            NoiseSpec("cauchy")
        with pytest.raises(ValidationError):
            NoiseSpec(relative_std=0.0)


def bench_sde(dt, scheme="euler", sigma=0.0, kappa=0.2):
    p0 = math.exp(eval_lppl(BENCH_PARAMS, 1.0))
    return SdeParams(to_hazard_params(BENCH_PARAMS, kappa), sigma, kappa, dt, p0, scheme)


class TestJls:
    def test_no_crash_euler_error_is_first_order(self, reference_series):
        errs = []
        for dt in (1.0, 0.1, 0.01):
            path = simulate_jls(bench_sde(dt), 240, 0, 1.0, crashes=False)
            errs.append(np.max(np.abs(path.values - reference_series.values)))
        assert errs[0] / errs[1] == pytest.approx(10.0, rel=0.1)
        assert errs[1] / errs[2] == pytest.approx(10.0, rel=0.1)

    def test_flat_without_hazard_or_noise(self):
        h = HazardParams(1e3, 0.5, 7.0, 0.0, 0.0, 0.0, 0.2)
        path = simulate_jls(SdeParams(h, 0.0, 0.2, 0.1, 2.0), 50, 0, crashes=False)
        np.testing.assert_array_equal(path.values, math.log(2.0))

    def test_no_crash_path_nondecreasing_when_margin_nonnegative(self):
        p = LpplParams(300.0, 0.7, 10.0, 1.0, 10.0, -0.1, 0.002)
        assert hazard_margin(p) >= 0
        sde = SdeParams(to_hazard_params(p, 0.2), 0.0, 0.2, 0.01, 1.0)
        path = simulate_jls(sde, 240, 0, 1.0, crashes=False)
        assert np.all(np.diff(path.values) >= 0)

    def test_exact_scheme_lies_on_curve(self, reference_series):
        path = simulate_jls(bench_sde(0.1, "exact"), 240, 0, 1.0, crashes=False)
        np.testing.assert_allclose(path.values, reference_series.values, rtol=0, atol=1e-12)

    def test_crash_drops_log_price_by_log_one_minus_kappa(self):
        sde = SdeParams(constant_hazard(0.05), 0.0, 0.3, 0.5, 1.0)
        path = simulate_jls(sde, 201, 4, 0.0)
        assert path.crash_times
        # drift 0.3 * 0.05 per day, jumps ln(0.7)
        expected_end = 0.3 * 0.05 * 200 + len(path.crash_times) * math.log(0.7)
        assert path.values[-1] == pytest.approx(expected_end, abs=1e-10)

    def test_constant_hazard_crash_frequency(self):
        rate, T = 0.01, 50
        sde = SdeParams(constant_hazard(rate), 0.05, 0.2, 0.1, 1.0)
        _, crashes = simulate_jls_ensemble(sde, T + 1, 7, 3000)
        freq = np.mean([bool(c) for c in crashes])
        p = 1 - math.exp(-rate * T)
        assert abs(freq - p) < 3 * math.sqrt(p * (1 - p) / 3000)

    def test_ensemble_rows_match_single_paths(self):
        sde = bench_sde(0.5, sigma=0.01)
        logp, crashes = simulate_jls_ensemble(sde, 60, 11, 5, 1.0, chunk=2)
        for i in (0, 3):
            one = simulate_jls(sde, 60, path_seed(11, i), 1.0)
            np.testing.assert_array_equal(logp[i], one.values)
            assert crashes[i] == one.crash_times

    def test_output_independent_of_chunk(self):
        sde = bench_sde(0.5, sigma=0.01)
        a, _ = simulate_jls_ensemble(sde, 40, 2, 7, 1.0, chunk=3)
        b, _ = simulate_jls_ensemble(sde, 40, 2, 7, 1.0, chunk=128)
        np.testing.assert_array_equal(a, b)

    def test_horizon_reaching_tc(self):
        with pytest.raises(DomainError):
            simulate_jls(bench_sde(0.5), 300, 0, 1.0)

    def test_step_must_divide_a_day(self):
        with pytest.raises(ValidationError):
            simulate_jls(bench_sde(0.3), 10, 0, 1.0)

    def test_hazard_mass_per_step_capped(self):
        sde = SdeParams(constant_hazard(3.0), 0.0, 0.2, 0.5, 1.0)
        with pytest.raises(ValidationError):
            simulate_jls(sde, 10, 0)

    def test_invalid_sde(self):
        h = constant_hazard(0.1)
        for kw in ({"sigma": -1}, {"dt": 0}, {"kappa": 1.0}, {"p0": 0}, {"scheme": "rk4"}):
            with pytest.raises(ValidationError):
                SdeParams(h, **kw)


class TestCrashProbability:
    def test_constant_hazard(self):
        assert crash_probability(constant_hazard(0.01), 0, 100) == pytest.approx(0.6321205588285577, rel=1e-12)

    def test_zero_hazard(self):
        h = HazardParams(300.0, 0.7, 10.0, 0.0, 0.0, 0.0, 0.2)
        assert crash_probability(h, 0.0, 300.0) == 0.0

    def test_power_law_up_to_tc_closed_form(self):
        h = HazardParams(300.0, 0.5, 10.0, 0.01, 0.0, 0.0, 0.2)
        integral = 0.01 * math.sqrt(300.0 - 200.0) / 0.5
        p = crash_probability(h, 200.0, 300.0)
        assert p == pytest.approx(1 - math.exp(-integral), rel=1e-12)
        assert p < 1

    def test_monotone_in_t2(self):
        h = to_hazard_params(LpplParams(300.0, 0.7, 10.0, 1.0, 10.0, -0.1, 0.002), 0.2)
        ps = [crash_probability(h, 1.0, t2) for t2 in np.linspace(2.0, 300.0, 40)]
        assert all(0 <= a <= b < 1 for a, b in zip(ps, ps[1:]))

    def test_against_direct_quadrature(self):
        h = to_hazard_params(BENCH_PARAMS, 0.2)
        direct, _ = integrate.quad(lambda t: eval_hazard(h, t), 1.0, 290.0, limit=500)
        assert crash_probability(h, 1.0, 290.0) == pytest.approx(-math.expm1(-direct), rel=1e-8)

    def test_up_to_tc_is_finite(self):
        # m < 1: the hazard diverges at t_c but stays integrable
        h = to_hazard_params(BENCH_PARAMS, 0.2)
        p = crash_probability(h, 1.0, 300.0)
        assert 0 < p < 1
        assert p > crash_probability(h, 1.0, 299.0)

    def test_bad_interval(self):
        h = to_hazard_params(BENCH_PARAMS, 0.2)
        with pytest.raises(DomainError):
            crash_probability(h, 10, 5)
        with pytest.raises(DomainError):
            crash_probability(h, 10, 301)
