import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from dpbench.primitives import (
    BudgetError,
    exact_stage_split,
    exponential_mechanism,
    laplace_vector,
    softmax_probabilities,
    split_budget,
)
from dpbench.rng import RngStream


class TestLaplace:
    def test_mean_near_zero(self):
        samples = laplace_vector(2.0, 1.0, 100_000, RngStream(1))
        assert abs(samples.mean()) < 0.05

    def test_variance_matches_2b_squared(self):
        # Laplace(b) has variance 2 b^2; here b = 2
        samples = laplace_vector(2.0, 1.0, 100_000, RngStream(2))
        assert abs(samples.var() / 8.0 - 1.0) < 0.05

    def test_same_stream_replays(self):
        stream = RngStream(3, 17)
        assert np.array_equal(
            laplace_vector(1.0, 1.0, 10, stream), laplace_vector(1.0, 1.0, 10, stream)
        )

    def test_kolmogorov_smirnov(self):
        samples = laplace_vector(1.5, 0.5, 100_000, RngStream(4))
        result = stats.kstest(samples, stats.laplace(scale=3.0).cdf)
        assert result.pvalue > 0.01

    def test_rejects_bad_parameters(self):
        with pytest.raises(ValueError):
            laplace_vector(0.0, 1.0, 1, RngStream(0))
        with pytest.raises(ValueError):
            laplace_vector(1.0, -1.0, 1, RngStream(0))


class TestExponentialMechanism:
    def test_equal_scores_symmetric(self):
        gen = RngStream(5).generator()
        picks = [exponential_mechanism([0, 1], [1.0, 1.0], 1.0, 1.0, gen) for _ in range(10_000)]
        assert abs(np.mean(picks) - 0.5) < 0.02

    def test_huge_epsilon_picks_top_score(self):
        gen = RngStream(6).generator()
        picks = [exponential_mechanism(["a", "b"], [0.0, 1.0], 1e6, 1.0, gen) for _ in range(1000)]
        assert picks == ["b"] * 1000

    def test_zero_epsilon_uniform(self):
        gen = RngStream(7).generator()
        picks = [exponential_mechanism([0, 1, 2, 3], [0, 5, 1, 2], 0.0, 1.0, gen) for _ in range(10_000)]
        freqs = np.bincount(picks, minlength=4) / 10_000
        assert np.all(np.abs(freqs - 0.25) < 0.02)

    def test_frequencies_match_softmax(self):
        scores = np.array([0.0, 1.0, 2.0, -1.0, 0.5, 3.0, 2.5, 1.5])
        expected = softmax_probabilities(scores, 1.2, 1.0)
        gen = RngStream(8).generator()
        picks = [
            exponential_mechanism(range(8), scores, 1.2, 1.0, gen) for _ in range(10_000)
        ]
        freqs = np.bincount(picks, minlength=8) / 10_000
        assert 0.5 * np.abs(freqs - expected).sum() < 0.02  # total variation

    def test_empty_candidates_rejected(self):
        with pytest.raises(ValueError):
            exponential_mechanism([], [], 1.0, 1.0, RngStream(0))


class TestBudget:
    def test_quarter_split(self):
        assert split_budget(1.0, [0.25, 0.75]) == (0.25, 0.75)

    def test_small_epsilon_split(self):
        parts = split_budget(0.1, [0.05, 0.95])
        assert parts[0] == pytest.approx(0.005)
        assert parts[1] == pytest.approx(0.095)

    def test_overcommitted_fractions_rejected(self):
        with pytest.raises(BudgetError):
            split_budget(1.0, [0.6, 0.6])

    @given(
        st.floats(min_value=1e-6, max_value=1e6),
        st.lists(st.floats(min_value=0.01, max_value=1.0), min_size=1, max_size=8),
    )
    @settings(max_examples=200, deadline=None)
    def test_exact_stage_split_sums_bit_exactly(self, epsilon, weights):
        fractions = [w / sum(weights) for w in weights]
        parts = exact_stage_split(epsilon, fractions)
        total = 0.0
        for p in parts:
            assert p > 0
            total += p
        assert total == epsilon
