"""Tests for keyleak.constructions"""
from fractions import Fraction

import pytest

from keyleak.constructions import (
    ber_counterexample_search,
    greedy_coupling,
    kpa_counterexample,
    maximal_coupling,
    mixture_feasibility,
    product_coupling,
    saturating_distribution,
    spike_mixture,
    spiked_distribution,
    spiked_summary,
)
from keyleak.distributions import KeyDistribution, optimal_ber, ordered_profile, stat_distance
from keyleak.exceptions import InfeasibleParameterError, ParameterRangeError
from keyleak.oracle import subset_success


def test_kpa_counterexample_levels():
    P = kpa_counterexample(6, 3)
    assert P.prob(0) == Fraction(1, 8)
    # Shares key 0's 3-bit prefix
    assert P.prob(8) == 0
    assert P.prob(1) == Fraction(1, 64)


def test_kpa_counterexample_rejects_full_prefix():
    with pytest.raises(ParameterRangeError):
        kpa_counterexample(4, 4)


def test_saturating_distribution_meets_subset_bound():
    P = saturating_distribution(8, [0], Fraction(1, 10))
    assert stat_distance(P, KeyDistribution.uniform(8)) == Fraction(1, 10)
    assert subset_success(P, [0]) == Fraction(3, 5)


def test_saturating_distribution_other_subset_value():
    P = saturating_distribution(6, [1, 4], Fraction(1, 8), subset_value=2)
    assert subset_success(P, [1, 4]) == Fraction(1, 4) + Fraction(1, 8)
    # Smallest key with bit 4 set and bit 1 clear
    assert ordered_profile(P).p1 == P.prob(16)


def test_saturating_distribution_infeasible_delta():
    with pytest.raises(InfeasibleParameterError) as info:
        saturating_distribution(4, [0], 0.6)
    assert info.value.feasible_max == 0.5


@pytest.mark.parametrize("n", range(1, 11))
def test_saturation_for_every_subset_size(n):
    uniform = KeyDistribution.uniform(n)
    for s in range(1, n + 1):
        # Highest s bits; subset value with every bit set
        positions = list(range(n - s, n))
        for k in range(1, 9):
            delta = Fraction(1, 1 << k)
            P = saturating_distribution(n, positions, delta, subset_value=(1 << s) - 1)
            assert stat_distance(P, uniform) == delta
            assert subset_success(P, positions) == Fraction(1, 1 << s) + delta


def test_spiked_distribution_profile():
    P = spiked_distribution(8, 3)
    profile = ordered_profile(P)
    assert profile.p1 == Fraction(1, 8)
    assert profile.counts == (1, 255)


def test_spiked_leak_per_bit_far_below_guess_probability():
    summary = spiked_summary(12, 6)
    assert summary.spike_level / 4 <= summary.leak_per_bit <= summary.spike_level
    assert summary.p1 == pytest.approx(2.0 ** -6)


def test_kpa_counterexample_is_not_a_mixture_at_its_distance():
    P = kpa_counterexample(6, 3)
    verdict = mixture_feasibility(P, stat_distance(P, KeyDistribution.uniform(6)))
    assert not verdict.feasible
    assert verdict.violating_index == 0


def test_spike_mixture_is_feasible_at_its_weight():
    lam = Fraction(1, 5)
    P = spike_mixture(5, lam, k0=7)
    assert mixture_feasibility(P, lam).feasible
    assert stat_distance(P, KeyDistribution.uniform(5)) == lam * (1 - Fraction(1, 32))


def test_maximal_coupling_attains_agreement(random_distribution):
    P, Q = random_distribution(4), random_distribution(4)
    coupling = maximal_coupling(P, Q)
    assert coupling.is_valid(P, Q)
    assert coupling.agreement_probability == pytest.approx(1 - stat_distance(P, Q), abs=1e-12)


def test_other_couplings_agree_less(random_distribution, rng):
    P, Q = random_distribution(4), random_distribution(4)
    bound = 1 - stat_distance(P, Q) + 1e-12
    for coupling in (product_coupling(P, Q), greedy_coupling(P, Q, rng)):
        assert coupling.is_valid(P, Q)
        assert coupling.agreement_probability <= bound


@pytest.mark.parametrize("n,d", [(1, 0.2), (2, 0.26), (4, 0.1), (8, 0.05)])
def test_ber_counterexample_search_finds_violations(n, d):
    P = ber_counterexample_search(n, d, seed=3)
    assert P is not None
    assert float(stat_distance(P, KeyDistribution.uniform(n, exact=False))) <= d + 1e-12
    assert float(optimal_ber(P)) < (1 - d) / 2


def test_ber_counterexample_search_without_room():
    assert ber_counterexample_search(3, 0.0) is None
