import math

import numpy as np
import pytest

from pnlrank.errors import DimensionMismatch
from pnlrank.hsic import (
    HsicConfig,
    gram_gaussian,
    hsic_biased,
    hsic_statistic,
    median_squared_distance,
)


def dense_hsic(k, l):
    """Independent oracle: (1/n^2) tr(K H L H) with explicit centering."""
    n = k.shape[0]
    h = np.eye(n) - np.ones((n, n)) / n
    return float(np.trace(k @ h @ l @ h)) / n**2


class TestGramGaussian:
    def test_identical_rows_give_ones(self):
        rows = np.array([[1.5, -2.0], [1.5, -2.0]])
        np.testing.assert_array_equal(gram_gaussian(rows, 1.0), np.ones((2, 2)))

    def test_unit_distance(self):
        rows = np.array([[0.0], [1.0]])
        k = gram_gaussian(rows, 1.0)
        assert k[0, 1] == pytest.approx(math.exp(-1.0), rel=1e-15)
        assert k[0, 0] == 1.0 == k[1, 1]

    def test_bandwidth_scales_exponent(self):
        rows = np.array([[0.0], [2.0]])
        k = gram_gaussian(rows, 4.0)
        assert k[0, 1] == pytest.approx(math.exp(-1.0), rel=1e-15)

    def test_symmetric_psd(self):
        rows = np.random.default_rng(0).normal(size=(50, 3))
        k = gram_gaussian(rows, 2.0)
        assert np.array_equal(k, k.T)
        eig = np.linalg.eigvalsh(k)
        assert eig.min() > -1e-10
        assert np.all((k > 0) & (k <= 1.0))

    def test_bandwidth_validation(self):
        with pytest.raises(ValueError):
            gram_gaussian(np.ones((3, 1)), 0.0)


class TestHsicBiased:
    def test_constant_gram_annihilated(self):
        rng = np.random.default_rng(1)
        k = gram_gaussian(rng.normal(size=(20, 2)), 1.0)
        l = np.ones((20, 20))
        assert hsic_biased(k, l) == pytest.approx(0.0, abs=1e-15)

    def test_two_by_two_symbolic(self):
        for a, b in [(0.3, 0.8), (0.05, 0.9), (0.5, 0.5)]:
            k = np.array([[1.0, a], [a, 1.0]])
            l = np.array([[1.0, b], [b, 1.0]])
            assert hsic_biased(k, l) == pytest.approx((1 - a) * (1 - b) / 4, rel=1e-12)

    def test_matches_dense_trace_oracle(self):
        rng = np.random.default_rng(2)
        for trial in range(20):
            n = int(rng.integers(2, 129))
            k = gram_gaussian(rng.normal(size=(n, 2)), 1.0)
            l = gram_gaussian(rng.normal(size=(n, 1)), 1.0)
            got = hsic_biased(k, l)
            want = dense_hsic(k, l)
            assert got == pytest.approx(want, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            hsic_biased(np.ones((3, 3)), np.ones((4, 4)))

    def test_nonnegative(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            n = int(rng.integers(3, 60))
            k = gram_gaussian(rng.normal(size=(n, 2)), float(rng.uniform(0.5, 4)))
            l = gram_gaussian(rng.normal(size=(n, 1)), float(rng.uniform(0.5, 4)))
            assert hsic_biased(k, l) >= -1e-12


class TestHsicStatistic:
    def test_constant_residuals_give_zero(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(30, 2))
        e = np.full(30, 3.14)
        assert hsic_statistic(x, e, HsicConfig(1.0, 1.0)) == pytest.approx(0.0, abs=1e-14)

    def test_symmetry_in_arguments(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(40, 1))
        e = rng.normal(size=40)
        cfg = HsicConfig(1.0, 1.0)
        forward = hsic_statistic(x, e, cfg)
        backward = hsic_statistic(e.reshape(-1, 1), x.ravel(), cfg)
        assert forward == pytest.approx(backward, rel=1e-12)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=(50, 3))
        e = x[:, 0] ** 2 + rng.normal(size=50)
        perm = rng.permutation(50)
        a = hsic_statistic(x, e)
        b = hsic_statistic(x[perm], e[perm])
        assert a == pytest.approx(b, abs=1e-14)

    def test_dependent_exceeds_permutation_null(self):
        rng = np.random.default_rng(7)
        n = 500
        x = rng.normal(size=(n, 2))
        e = np.sin(x[:, 0]) + 0.2 * rng.normal(size=n)
        stat = hsic_statistic(x, e)
        null = []
        for _ in range(200):
            null.append(hsic_statistic(x, rng.permutation(e)))
        assert stat > np.quantile(null, 0.95)

    def test_independent_below_null_quantile_mostly(self):
        hits = 0
        seeds = 50
        for s in range(seeds):
            rng = np.random.default_rng(1000 + s)
            n = 500
            x = rng.normal(size=(n, 2))
            e = rng.normal(size=n)
            stat = hsic_statistic(x, e)
            null = [hsic_statistic(x, rng.permutation(e)) for _ in range(40)]
            if stat <= np.quantile(null, 0.95):
                hits += 1
        assert hits >= 0.90 * seeds

    def test_median_heuristic_deterministic_and_positive(self):
        rows = np.random.default_rng(8).normal(size=(1200, 2)) * 50
        a = median_squared_distance(rows)
        b = median_squared_distance(rows)
        assert a == b > 0

    def test_unit_mode_matches_fixed_bandwidth(self):
        rng = np.random.default_rng(9)
        x = rng.normal(size=(25, 2))
        e = rng.normal(size=25)
        assert hsic_statistic(x, e, HsicConfig.unit()) == hsic_statistic(
            x, e, HsicConfig(1.0, 1.0)
        )
