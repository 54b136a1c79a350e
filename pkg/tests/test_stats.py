"""Significance tests against exact-enumeration and scipy oracles."""

import itertools

import numpy as np
import pytest
from scipy import stats as sps

from tmaze_evo.errors import DegenerateSamplesError
from tmaze_evo.stats import rank_sum_test, t_test_vs_chance


def exact_u_two_sided(a, b):
    """Two-sided p by enumerating all rank assignments (distinct values)."""
    n1, n2 = len(a), len(b)
    pooled = sorted(list(a) + list(b))
    ranks = {v: i + 1 for i, v in enumerate(pooled)}
    u_obs = sum(ranks[v] for v in a) - n1 * (n1 + 1) / 2
    us = np.array([sum(c) - n1 * (n1 + 1) / 2
                   for c in itertools.combinations(range(1, n1 + n2 + 1), n1)])
    p = 2 * min((us <= u_obs).mean(), (us >= u_obs).mean())
    return min(1.0, p)


class TestRankSum:
    def test_identical_samples_not_significant(self):
        a = [1.0, 2.0, 3.0, 4.0, 5.0]
        assert rank_sum_test(a, a) >= 0.99

    def test_separated_five_vs_five_matches_enumeration(self):
        """Fully separated n=m=5 hits the exact enumeration p."""
        a = [1.0, 2.0, 3.0, 4.0, 5.0]
        b = [10.0, 11.0, 12.0, 13.0, 14.0]
        exact = exact_u_two_sided(a, b)
        assert exact == pytest.approx(2 / 252, abs=1e-12)
        assert rank_sum_test(a, b) == pytest.approx(exact, abs=1e-12)

    def test_small_untied_samples_are_exact(self):
        """Every size pair up to 8 reproduces the enumeration oracle."""
        rng = np.random.default_rng(11)
        for n1 in range(2, 9):
            for n2 in range(2, 9):
                a = rng.normal(size=n1)
                b = rng.normal(0.8, size=n2)
                assert rank_sum_test(a, b) == pytest.approx(
                    exact_u_two_sided(list(a), list(b)), abs=1e-12)

    def test_dispatch_boundary_at_size_eight(self):
        """Sizes past 8 (or ties at any size) use the approximation."""
        rng = np.random.default_rng(12)
        a, b = rng.normal(size=8), rng.normal(0.5, size=9)
        want = sps.mannwhitneyu(a, b, alternative="two-sided",
                                method="asymptotic").pvalue
        assert rank_sum_test(a, b) == pytest.approx(want, abs=1e-12)
        ai = np.array([0.0, 1.0, 1.0, 2.0])
        bi = np.array([1.0, 2.0, 3.0, 3.0, 4.0])
        want = sps.mannwhitneyu(ai, bi, alternative="two-sided",
                                method="asymptotic").pvalue
        assert rank_sum_test(ai, bi) == pytest.approx(want, abs=1e-12)

    def test_textbook_ten_vs_ten_matches_enumeration(self):
        """The n=m=10, U=23 case is within 0.005 of the exact p."""
        a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 12.0, 18.0, 20.0]
        b = [float(v) for v in range(1, 21) if float(v) not in a]
        u1 = sum(sorted(a + b).index(v) + 1 for v in a) - 55
        assert u1 == 23
        assert abs(rank_sum_test(a, b) - exact_u_two_sided(a, b)) < 0.005

    def test_matches_scipy_across_methods(self):
        """300 random pairs agree with the matching library method."""
        rng = np.random.default_rng(2)
        for _ in range(300):
            n1 = int(rng.integers(3, 12))
            n2 = int(rng.integers(3, 12))
            if rng.random() < 0.5:
                a = rng.normal(size=n1)
                b = rng.normal(0.4, size=n2)
            else:
                a = rng.integers(0, 5, n1).astype(float)
                b = rng.integers(0, 5, n2).astype(float)
            pooled = np.concatenate([a, b])
            if np.all(pooled == pooled[0]):
                continue
            untied = np.unique(pooled).size == pooled.size
            method = "exact" if untied and n1 <= 8 and n2 <= 8 \
                else "asymptotic"
            want = sps.mannwhitneyu(a, b, alternative="two-sided",
                                    method=method).pvalue
            assert rank_sum_test(a, b) == pytest.approx(want, abs=1e-12)

    def test_order_of_arguments_is_symmetric(self):
        rng = np.random.default_rng(6)
        a = rng.normal(size=8)
        b = rng.normal(1.0, size=6)
        assert rank_sum_test(a, b) == pytest.approx(rank_sum_test(b, a),
                                                    abs=1e-12)

    def test_degenerate_and_empty_inputs(self):
        with pytest.raises(DegenerateSamplesError):
            rank_sum_test([2.0, 2.0], [2.0, 2.0, 2.0])
        with pytest.raises(ValueError):
            rank_sum_test([], [1.0])


class TestTVsChance:
    def test_at_chance_is_not_significant(self):
        assert t_test_vs_chance(5, 10, 0.5) == pytest.approx(1.0)

    def test_matches_scipy_on_indicator_vectors(self):
        """100 random hit counts agree with a library one-sample t-test."""
        rng = np.random.default_rng(4)
        for _ in range(100):
            total = int(rng.integers(5, 60))
            correct = int(rng.integers(1, total))
            chance = float(rng.uniform(0.1, 0.9))
            vec = np.concatenate([np.ones(correct), np.zeros(total - correct)])
            want = sps.ttest_1samp(vec, chance).pvalue
            assert t_test_vs_chance(correct, total, chance) == pytest.approx(
                want, abs=1e-12)

    def test_strong_separation_is_significant(self):
        assert t_test_vs_chance(770, 1000, 0.5) < 1e-4

    def test_same_verdict_as_exact_binomial_at_small_n(self):
        """Significance at 0.05 agrees with the exact binomial test."""
        for correct, total in [(9, 10), (6, 10), (8, 10), (13, 15)]:
            binom = sps.binomtest(correct, total, 0.5).pvalue
            ours = t_test_vs_chance(correct, total, 0.5)
            assert (ours < 0.05) == (binom < 0.05)

    def test_zero_variance_raises(self):
        with pytest.raises(DegenerateSamplesError):
            t_test_vs_chance(10, 10, 0.5)
        with pytest.raises(DegenerateSamplesError):
            t_test_vs_chance(0, 8, 0.5)
        with pytest.raises(ValueError):
            t_test_vs_chance(1, 1, 0.5)
