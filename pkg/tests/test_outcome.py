"""Tests for the joint-outcome distribution and its sampler."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from starqkd.errors import ConfigurationError
from starqkd.outcome import (
    ALLOWED_JOINT_BINS,
    OutcomeDistribution,
    PairOutcome,
    TimeBin,
    joint_outcome_distribution,
    sample_pair_outcome,
    sample_pair_outcomes,
)

from .oracles import outcome_table_oracle

phases = st.floats(-2 * math.pi, 2 * math.pi, allow_nan=False)
visibilities = st.floats(0.0, 1.0, allow_nan=False)


class TestDistributionShape:
    def test_normalized(self):
        dist = joint_outcome_distribution(0.3, -1.2, 0.7, 0.95)
        assert abs(dist.probabilities.sum() - 1.0) < 1e-12

    def test_rejects_bad_visibility(self):
        with pytest.raises(ConfigurationError):
            joint_outcome_distribution(0, 0, 0, 1.5)

    def test_rejects_unnormalized_table(self):
        with pytest.raises(ConfigurationError):
            OutcomeDistribution(np.full((3, 2, 3, 2), 0.1))

    def test_rejects_wrong_shape(self):
        with pytest.raises(ConfigurationError):
            OutcomeDistribution(np.full(36, 1.0 / 36.0))

    def test_port_validation(self):
        with pytest.raises(ConfigurationError):
            PairOutcome(TimeBin.EARLY, 2, TimeBin.EARLY, 0)


class TestBinStructure:
    def test_bin_marginals_quarter_half_quarter(self):
        dist = joint_outcome_distribution(0.8, 0.1, -0.4, 0.97)
        marg_a = dist.probabilities.sum(axis=(1, 2, 3))
        marg_b = dist.probabilities.sum(axis=(0, 1, 3))
        for marg in (marg_a, marg_b):
            assert marg == pytest.approx([0.25, 0.5, 0.25], abs=1e-12)

    def test_forbidden_cross_bins(self):
        dist = joint_outcome_distribution(1.0, 2.0, 3.0, 0.9)
        assert dist.joint_bin_probability(TimeBin.EARLY, TimeBin.LATE) == 0.0
        assert dist.joint_bin_probability(TimeBin.LATE, TimeBin.EARLY) == 0.0

    def test_outer_bins_balanced(self):
        dist = joint_outcome_distribution(0.2, 0.9, 1.4, 0.8)
        assert dist.joint_bin_probability(
            TimeBin.EARLY, TimeBin.EARLY
        ) == pytest.approx(
            dist.joint_bin_probability(TimeBin.LATE, TimeBin.LATE), abs=1e-15
        )

    def test_allowed_bins_cover_everything(self):
        dist = joint_outcome_distribution(0.0, 0.0, 0.0, 1.0)
        total = sum(dist.joint_bin_probability(a, b) for a, b in ALLOWED_JOINT_BINS)
        assert total == pytest.approx(1.0, abs=1e-12)


class TestCentralInterference:
    def test_aligned_phases_correlate_ports(self):
        dist = joint_outcome_distribution(0.0, 0.0, 0.0, 1.0)
        cond = dist.conditional_port_probabilities(TimeBin.CENTRAL, TimeBin.CENTRAL)
        assert cond[0, 0] == pytest.approx(0.5, abs=1e-12)
        assert cond[1, 1] == pytest.approx(0.5, abs=1e-12)
        assert cond[0, 1] == pytest.approx(0.0, abs=1e-12)
        assert cond[1, 0] == pytest.approx(0.0, abs=1e-12)

    def test_pi_source_phase_anticorrelates_ports(self):
        dist = joint_outcome_distribution(0.0, 0.0, math.pi, 1.0)
        cond = dist.conditional_port_probabilities(TimeBin.CENTRAL, TimeBin.CENTRAL)
        assert cond[0, 1] == pytest.approx(0.5, abs=1e-12)
        assert cond[1, 0] == pytest.approx(0.5, abs=1e-12)
        assert cond[0, 0] == pytest.approx(0.0, abs=1e-12)

    def test_conditional_follows_cosine_law(self):
        alpha, beta, phi, vis = 0.4, -0.25, 0.1, 0.93
        delta = alpha + beta - phi
        dist = joint_outcome_distribution(alpha, beta, phi, vis)
        cond = dist.conditional_port_probabilities(TimeBin.CENTRAL, TimeBin.CENTRAL)
        for i in (0, 1):
            for j in (0, 1):
                sign = (-1.0) ** (i + j)
                expected = 0.25 * (1.0 + sign * vis * math.cos(delta))
                assert cond[i, j] == pytest.approx(expected, abs=1e-12)

    def test_zero_visibility_uniform_ports(self):
        dist = joint_outcome_distribution(0.7, 1.1, -0.3, 0.0)
        cond = dist.conditional_port_probabilities(TimeBin.CENTRAL, TimeBin.CENTRAL)
        assert cond == pytest.approx(np.full((2, 2), 0.25), abs=1e-12)

    def test_phase_error_probability(self):
        dist = joint_outcome_distribution(0.0, 0.0, 0.0, 0.9)
        # (1 - V)/2 mismatch at perfect alignment
        assert dist.phase_error_probability() == pytest.approx(0.05, abs=1e-12)

    @given(phases, phases, st.integers(-3, 3), visibilities)
    def test_perfect_alignment_zero_error(self, alpha, beta, n, vis):
        phi = alpha + beta - 2.0 * math.pi * n
        dist = joint_outcome_distribution(alpha, beta, phi, 1.0)
        assert dist.phase_error_probability() == pytest.approx(0.0, abs=1e-9)


class TestOracleAgreement:
    @given(phases, phases, phases, visibilities)
    @settings(max_examples=200)
    def test_table_matches_amplitude_enumeration(self, alpha, beta, phi, vis):
        dist = joint_outcome_distribution(alpha, beta, phi, vis)
        oracle = outcome_table_oracle(alpha, beta, phi, vis)
        assert np.allclose(dist.probabilities, oracle, atol=1e-10)

    @given(phases, phases, phases, phases, visibilities)
    def test_depends_only_on_phase_sum(self, alpha, beta, phi, delta, vis):
        base = joint_outcome_distribution(alpha, beta, phi, vis)
        shifted = joint_outcome_distribution(alpha + delta, beta - delta, phi, vis)
        assert np.allclose(base.probabilities, shifted.probabilities, atol=1e-9)


class TestSampling:
    def test_degenerate_distribution(self):
        probs = np.zeros((3, 2, 3, 2))
        probs[TimeBin.LATE, 1, TimeBin.CENTRAL, 0] = 1.0
        dist = OutcomeDistribution(probs)
        rng = np.random.default_rng(5)
        for _ in range(20):
            out = sample_pair_outcome(dist, rng)
            assert out == PairOutcome(TimeBin.LATE, 1, TimeBin.CENTRAL, 0)

    def test_fixed_seed_reproducible(self):
        dist = joint_outcome_distribution(0.4, 0.2, 0.0, 0.95)
        draws1 = sample_pair_outcomes(dist, np.random.default_rng(77), 1000)
        draws2 = sample_pair_outcomes(dist, np.random.default_rng(77), 1000)
        for a, b in zip(draws1, draws2):
            assert np.array_equal(a, b)

    def test_no_port_mismatch_at_aligned_phases(self):
        dist = joint_outcome_distribution(0.0, 0.0, 0.0, 1.0)
        rng = np.random.default_rng(11)
        bins_a, ports_a, bins_b, ports_b = sample_pair_outcomes(dist, rng, 1_000_000)
        central = (bins_a == TimeBin.CENTRAL) & (bins_b == TimeBin.CENTRAL)
        mismatch = np.count_nonzero(ports_a[central] != ports_b[central])
        assert mismatch / max(np.count_nonzero(central), 1) < 0.002

    def test_frequencies_chi_square_consistent(self):
        from scipy import stats

        dist = joint_outcome_distribution(0.9, -0.6, 0.2, 0.85)
        rng = np.random.default_rng(2024)
        n = 200_000
        bins_a, ports_a, bins_b, ports_b = sample_pair_outcomes(dist, rng, n)
        codes = ((bins_a * 2 + ports_a) * 3 + bins_b) * 2 + ports_b
        counts = np.bincount(codes, minlength=36)
        expected = dist.flat() * n
        keep = expected > 0
        assert np.all(counts[~keep] == 0)
        _, pvalue = stats.chisquare(counts[keep], expected[keep])
        assert pvalue > 1e-4

    def test_sampler_rejects_negative_size(self):
        dist = joint_outcome_distribution(0, 0, 0, 1.0)
        with pytest.raises(ConfigurationError):
            sample_pair_outcomes(dist, np.random.default_rng(0), -1)
