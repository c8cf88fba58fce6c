import numpy as np
import pytest

import fockfit.bootstrap as bt
from fockfit.bootstrap import (
    BootstrapError,
    bc_interval,
    coverage_probability,
    parametric_bootstrap,
    percentile_interval,
)
from fockfit.estimation import FitResult, PriorShape, fit, posterior_weights
from fockfit.model import SqueezedThermalState, fock_distribution, to_variances
from fockfit.sampling import SeedSpec, sample_histogram

PRIOR = PriorShape(1.0, 1.0)


def fit_state(r, nbar, shots, stream=0, seed=314):
    dist = fock_distribution(to_variances(SqueezedThermalState(r, nbar)), 20)
    h = sample_histogram(dist, shots, SeedSpec(seed, stream))
    return fit(h, posterior_weights(h, PRIOR))


class TestPercentileInterval:
    def test_index_arithmetic(self):
        values = np.arange(1.0, 1001.0)
        ci = percentile_interval(values, 0.05, "r")
        assert (ci.lower, ci.upper) == (50.0, 950.0)
        assert ci.level == pytest.approx(0.90)

    def test_degenerate_replicates(self):
        ci = percentile_interval(np.full(100, 3.25), 0.05)
        assert (ci.lower, ci.upper) == (3.25, 3.25)

    def test_small_alpha_clamps_lower_index(self):
        # l = floor(100 * 0.004) = 0 clamps to the first order statistic;
        # m = floor(100 * 0.996) = 99 stays an interior index
        values = np.arange(1.0, 101.0)
        ci = percentile_interval(values, 0.004, "vq")
        assert ci.lower == 1.0
        assert ci.upper == 99.0

    def test_requires_sorted(self):
        with pytest.raises(ValueError):
            percentile_interval(np.array([3.0, 1.0, 2.0]), 0.05)

    def test_alpha_domain(self):
        values = np.arange(1.0, 11.0)
        for alpha in (0.0, 0.5, -0.1):
            with pytest.raises(ValueError):
                percentile_interval(values, alpha)


class TestBcInterval:
    def test_matches_percentile_when_unbiased(self):
        values = np.arange(1.0, 1001.0)
        ci = bc_interval(values, point_estimate=500.0, alpha=0.05, parameter="r")
        ref = percentile_interval(values, 0.05, "r")
        assert ci.lower == pytest.approx(ref.lower, abs=1e-12)
        assert ci.upper == pytest.approx(ref.upper, abs=1e-12)

    def test_degenerate_replicates_collapse(self):
        values = np.full(50, 1.5)
        ci = bc_interval(values, point_estimate=1.5, alpha=0.05)
        assert (ci.lower, ci.upper) == (1.5, 1.5)

    def test_point_outside_range_is_clamped(self):
        values = np.arange(1.0, 101.0)
        lo = bc_interval(values, point_estimate=-5.0, alpha=0.05)
        hi = bc_interval(values, point_estimate=500.0, alpha=0.05)
        assert lo.lower <= lo.upper
        assert hi.lower <= hi.upper
        assert lo.lower == 1.0
        assert hi.upper == pytest.approx(100.0, abs=1e-6)

    def test_bias_shifts_interval_upward(self):
        # point estimate above the replicate median -> b > 0 -> both
        # endpoints move to higher order statistics
        values = np.arange(1.0, 1001.0)
        ci = bc_interval(values, point_estimate=700.0, alpha=0.05)
        ref = percentile_interval(values, 0.05)
        assert ci.lower > ref.lower
        assert ci.upper > ref.upper

    def test_monotone_in_alpha(self):
        rng = np.random.default_rng(4)
        values = np.sort(rng.normal(size=500))
        wide = bc_interval(values, 0.1, 0.025)
        narrow = bc_interval(values, 0.1, 0.05)
        assert wide.lower <= narrow.lower
        assert narrow.upper <= wide.upper
        wide_p = percentile_interval(values, 0.025)
        narrow_p = percentile_interval(values, 0.05)
        assert wide_p.lower <= narrow_p.lower
        assert narrow_p.upper <= wide_p.upper


class TestParametricBootstrap:
    def test_reproducible_two_replicates(self):
        point = fit_state(1.0, 0.01, 2000)
        a = parametric_bootstrap(point, 2000, 2, PRIOR, SeedSpec(5, 100))
        b = parametric_bootstrap(point, 2000, 2, PRIOR, SeedSpec(5, 100))
        assert a == b
        assert a.n_b == 2

    def test_vacuum_point_gives_vacuum_replicates(self):
        h_counts = tuple([500] + [0] * 20)
        from fockfit.estimation import FockHistogram

        h = FockHistogram(h_counts, 0, 500)
        point = fit(h, posterior_weights(h, PRIOR))
        reps = parametric_bootstrap(point, 500, 10, PRIOR, SeedSpec(6, 0))
        assert all(r == 0.0 for r in reps.r)
        assert all(n == 0.0 for n in reps.nbar)

    def test_spread_matches_direct_monte_carlo(self):
        truth = SqueezedThermalState(1.0, 0.01)
        point = fit_state(1.0, 0.01, 10 ** 4)
        reps = parametric_bootstrap(point, 10 ** 4, 1000, PRIOR, SeedSpec(7, 0))
        boot_std = np.std(reps.sorted_values("r"), ddof=1)
        direct = [
            fit_state(truth.r, truth.nbar, 10 ** 4, stream, seed=900).state.r
            for stream in range(400)
        ]
        direct_std = np.std(direct, ddof=1)
        assert boot_std < 2.0 * direct_std
        assert boot_std > 0.5 * direct_std

    def test_nonconverged_point_rejected(self):
        point = fit_state(0.5, 0.1, 500)
        bad = FitResult(point.variances, point.state, point.objective, False, 1)
        with pytest.raises(ValueError):
            parametric_bootstrap(bad, 500, 10, PRIOR, SeedSpec(0, 0))

    def test_failure_policy(self, monkeypatch):
        point = fit_state(0.5, 0.1, 300)
        real_fit = bt.fit
        calls = {"n": 0}

        def flaky_fit(h, w, **kw):
            calls["n"] += 1
            res = real_fit(h, w, **kw)
            if calls["n"] % 3 == 0:
                return FitResult(res.variances, res.state, res.objective, False, 1)
            return res

        monkeypatch.setattr(bt, "fit", flaky_fit)
        with pytest.raises(BootstrapError):
            parametric_bootstrap(point, 300, 30, PRIOR, SeedSpec(1, 0))

    def test_rare_failures_excluded_not_fatal(self, monkeypatch):
        point = fit_state(0.5, 0.1, 300)
        real_fit = bt.fit
        calls = {"n": 0}

        def once_flaky_fit(h, w, **kw):
            calls["n"] += 1
            res = real_fit(h, w, **kw)
            if calls["n"] == 5:
                return FitResult(res.variances, res.state, res.objective, False, 1)
            return res

        monkeypatch.setattr(bt, "fit", once_flaky_fit)
        reps = parametric_bootstrap(point, 300, 1000, PRIOR, SeedSpec(1, 0))
        assert reps.n_failed == 1
        assert reps.sorted_values("nbar").shape == (999,)


class TestCoverage:
    def test_small_run_reproducible_and_sane(self):
        res1 = coverage_probability(
            SqueezedThermalState(0.5, 0.1), 1000, 5, 40, 0.05,
            ("percentile", "bc"), PRIOR, SeedSpec(11, 0),
        )
        res2 = coverage_probability(
            SqueezedThermalState(0.5, 0.1), 1000, 5, 40, 0.05,
            ("percentile", "bc"), PRIOR, SeedSpec(11, 0),
        )
        assert res1 == res2
        for method in ("percentile", "bc"):
            for parameter in bt.PARAMETERS:
                assert 0.0 <= res1.coverage[method][parameter] <= 1.0

    def test_single_method_accepted(self):
        res = coverage_probability(
            SqueezedThermalState(0.5, 0.1), 500, 3, 20, 0.05,
            "percentile", PRIOR, SeedSpec(12, 0),
        )
        assert set(res.coverage) == {"percentile"}

    def test_unknown_method_rejected(self):
        with pytest.raises(ValueError):
            coverage_probability(
                SqueezedThermalState(0.5, 0.1), 500, 2, 20, 0.05,
                "bca", PRIOR, SeedSpec(12, 0),
            )


class TestConfidenceIntervalType:
    def test_validation(self):
        with pytest.raises(ValueError):
            bt.ConfidenceInterval(1.0, 0.5, 0.9, "bc", "r")
        with pytest.raises(ValueError):
            bt.ConfidenceInterval(0.0, 0.5, 0.9, "bca", "r")
        with pytest.raises(ValueError):
            bt.ConfidenceInterval(0.0, 0.5, 0.9, "bc", "sigma")

    def test_contains(self):
        ci = bt.ConfidenceInterval(0.0, 1.0, 0.9, "bc", "r")
        assert ci.contains(0.5) and not ci.contains(1.5)
