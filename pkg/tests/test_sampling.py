import numpy as np
import pytest
from scipy.stats import chi2

from fockfit.model import SqueezedThermalState, fock_distribution, to_variances
from fockfit.sampling import SeedSpec, sample_histogram

VACUUM_DIST = fock_distribution(to_variances(SqueezedThermalState(0, 0)), 20)
THERMAL_DIST = fock_distribution(to_variances(SqueezedThermalState(0, 1.0)), 10)


class TestSeedSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            SeedSpec(-1, 0)
        with pytest.raises(ValueError):
            SeedSpec(2 ** 64, 0)
        with pytest.raises(ValueError):
            SeedSpec(0, -1)

    def test_streams_differ(self):
        a = SeedSpec(123, 0).generator().random(4)
        b = SeedSpec(123, 1).generator().random(4)
        assert not np.allclose(a, b)


class TestSampleHistogram:
    def test_vacuum_is_deterministic(self):
        h = sample_histogram(VACUUM_DIST, 500, SeedSpec(0, 0))
        assert h.counts[0] == 500
        assert sum(h.counts) + h.overflow_count == 500

    def test_single_shot(self):
        for stream in range(20):
            h = sample_histogram(THERMAL_DIST, 1, SeedSpec(1, stream))
            assert sum(h.counts) + h.overflow_count == 1

    def test_totals_always_match(self):
        for stream in range(50):
            h = sample_histogram(THERMAL_DIST, 997, SeedSpec(5, stream))
            assert sum(h.counts) + h.overflow_count == 997

    def test_thermal_ground_fraction(self):
        # P(0) = 1/2 for nbar = 1; 5 sigma band around the binomial mean
        n = 10 ** 5
        h = sample_histogram(THERMAL_DIST, n, SeedSpec(2, 0))
        sigma = np.sqrt(0.25 / n)
        assert abs(h.counts[0] / n - 0.5) < 5 * sigma

    def test_bit_reproducible(self):
        a = sample_histogram(THERMAL_DIST, 12345, SeedSpec(77, 3))
        b = sample_histogram(THERMAL_DIST, 12345, SeedSpec(77, 3))
        assert a == b

    def test_invalid_shots(self):
        with pytest.raises(ValueError):
            sample_histogram(THERMAL_DIST, 0, SeedSpec(0, 0))


class TestMarginals:
    def test_bin_means_and_chi_squared(self):
        reps, shots = 1000, 500
        expected = np.array(THERMAL_DIST.probs + (THERMAL_DIST.overflow,))
        totals = np.zeros_like(expected)
        for i in range(reps):
            h = sample_histogram(THERMAL_DIST, shots, SeedSpec(9, i))
            totals += np.array(h.counts + (h.overflow_count,))
        n_draws = reps * shots
        freqs = totals / n_draws
        se = np.sqrt(expected * (1.0 - expected) / n_draws)
        assert np.all(np.abs(freqs - expected) <= 5 * se)
        pooled_expected = expected * n_draws
        stat = float(np.sum((totals - pooled_expected) ** 2 / pooled_expected))
        assert stat < chi2.isf(0.001, df=len(expected) - 1)

    def test_streams_uncorrelated(self):
        reps = 1000
        a = np.empty(reps)
        b = np.empty(reps)
        for i in range(reps):
            a[i] = sample_histogram(THERMAL_DIST, 200, SeedSpec(21, 2 * i)).counts[0]
            b[i] = sample_histogram(THERMAL_DIST, 200, SeedSpec(21, 2 * i + 1)).counts[0]
        corr = np.corrcoef(a, b)[0, 1]
        assert abs(corr) < 5.0 / np.sqrt(reps)
