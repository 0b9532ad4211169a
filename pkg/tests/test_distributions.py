"""Tests for keyleak.distributions"""
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from keyleak.constructions import biased_bits_distribution, kpa_counterexample
from keyleak.distributions import (
    JointKY,
    KeyDistribution,
    binary_entropy,
    bits_to_key,
    conditional_entropy,
    conditional_profile,
    dump_distribution,
    entropy,
    information_leak,
    inverse_binary_entropy,
    key_to_bits,
    marginal,
    min_entropy,
    mutual_information,
    optimal_ber,
    ordered_profile,
    parse_distribution,
    pushforward,
    stat_distance,
)
from keyleak.exceptions import (
    BudgetExceededError,
    ConditioningError,
    DistributionParseError,
    InvalidDistributionError,
    ParameterRangeError,
)

probability_vectors = st.lists(st.floats(0.01, 1.0), min_size=8, max_size=8).map(
    lambda xs: KeyDistribution.from_probabilities([x / sum(xs) for x in xs])
)


# =============================================================================
# CONSTRUCTION AND VALIDATION
# =============================================================================

def test_uniform_exact_profile():
    U = KeyDistribution.uniform(8)
    assert U.exact and U.is_dense
    assert ordered_profile(U).p1 == Fraction(1, 256)
    assert stat_distance(U, U) == 0


def test_bit_string_convention_puts_bit_zero_first():
    assert key_to_bits(1, 4) == "1000"
    assert bits_to_key("0001") == 8
    assert bits_to_key(key_to_bits(11, 4)) == 11


def test_rejects_probabilities_not_summing_to_one():
    with pytest.raises(InvalidDistributionError):
        KeyDistribution.from_probabilities([0.5, 0.2, 0.2, 0.2])


def test_rejects_negative_atom():
    with pytest.raises(InvalidDistributionError):
        KeyDistribution.from_atoms(2, {0: Fraction(-1, 4)}, background="uniform")


def test_dense_limit():
    with pytest.raises(BudgetExceededError):
        KeyDistribution.uniform(30, dense=False).to_dense()


def test_sparse_uniform_at_block_scale():
    U = KeyDistribution.uniform(1000)
    assert not U.is_dense
    assert min_entropy(U) == pytest.approx(1000.0)
    assert information_leak(U) == pytest.approx(0.0, abs=1e-9)


# =============================================================================
# MEASURES
# =============================================================================

def test_stat_distance_dimension_mismatch():
    with pytest.raises(InvalidDistributionError):
        stat_distance(KeyDistribution.uniform(3), KeyDistribution.uniform(4))


def test_stat_distance_of_kpa_counterexample():
    P = kpa_counterexample(6, 3)
    assert stat_distance(P, KeyDistribution.uniform(6)) == Fraction(1, 8) - Fraction(1, 64)


def test_two_biased_bits():
    P = biased_bits_distribution(2, Fraction(3, 5))
    assert stat_distance(P, KeyDistribution.uniform(2)) == Fraction(11, 100)
    assert optimal_ber(P) == Fraction(2, 5)


def test_point_mass_metrics():
    P = KeyDistribution.point_mass(5, key=3)
    assert entropy(P) == 0.0
    assert information_leak(P) == pytest.approx(5.0)
    assert min_entropy(P) == 0.0
    assert optimal_ber(P) == 0


def test_optimal_ber_of_uniform_is_half():
    assert optimal_ber(KeyDistribution.uniform(7)) == Fraction(1, 2)


def test_inverse_binary_entropy_takes_smaller_root():
    assert inverse_binary_entropy(binary_entropy(0.11)) == pytest.approx(0.11, abs=1e-6)
    assert inverse_binary_entropy(1.0) == 0.5
    assert inverse_binary_entropy(0.0) == 0.0


@given(probability_vectors, probability_vectors, probability_vectors)
@settings(max_examples=200, derandomize=True)
def test_triangle_inequality(P, Q, R):
    assert stat_distance(P, R) <= stat_distance(P, Q) + stat_distance(Q, R) + 1e-12


@given(probability_vectors, probability_vectors)
@settings(max_examples=200, derandomize=True)
def test_stat_distance_is_symmetric_and_bounded(P, Q):
    d = stat_distance(P, Q)
    assert 0.0 <= d <= 1.0
    assert d == pytest.approx(stat_distance(Q, P), abs=1e-15)


@given(probability_vectors)
@settings(max_examples=100, derandomize=True)
def test_leak_and_entropy_agree(P):
    assert information_leak(P) == pytest.approx(P.n - entropy(P), abs=1e-9)
    assert min_entropy(P) <= entropy(P) + 1e-12


@given(st.lists(st.integers(1, 5), min_size=8, max_size=8))
@settings(max_examples=200, derandomize=True)
def test_p1_is_at_least_uniform_level(counts):
    P = KeyDistribution.from_probabilities([Fraction(c, sum(counts)) for c in counts], exact=True)
    p1 = ordered_profile(P).p1
    assert p1 >= Fraction(1, 8)
    assert (p1 == Fraction(1, 8)) == (len(set(counts)) == 1)


def test_p1_equals_uniform_level_only_for_uniform():
    assert ordered_profile(KeyDistribution.uniform(10)).p1 == Fraction(1, 1024)
    assert ordered_profile(kpa_counterexample(10, 1)).p1 > Fraction(1, 1024)


# =============================================================================
# CONDITIONING, MARGINALS, PUSHFORWARD
# =============================================================================

def test_conditioning_on_kpa_prefix_reveals_key():
    P = kpa_counterexample(8, 4)
    rest = conditional_profile(P, {0: 0, 1: 0, 2: 0, 3: 0})
    assert rest.n == 4
    assert rest.prob(0) == 1


def test_conditioning_on_impossible_event():
    P = kpa_counterexample(8, 4)
    with pytest.raises(ConditioningError):
        conditional_profile(P, {0: 0, 1: 0, 2: 0, 3: 0, 4: 1})


def test_conditioning_needs_a_free_bit():
    with pytest.raises(ParameterRangeError):
        conditional_profile(KeyDistribution.uniform(2), {0: 1, 1: 0})


def test_sparse_and_dense_conditioning_agree():
    dense = KeyDistribution.from_atoms(6, {5: Fraction(1, 4)}, dense=True)
    sparse = KeyDistribution.from_atoms(6, {5: Fraction(1, 4)}, dense=False)
    known = {0: 1, 2: 1}
    assert stat_distance(conditional_profile(dense, known), conditional_profile(sparse, known).to_dense()) == 0


def test_conditionals_reassemble_the_marginal(rng):
    counts = rng.integers(1, 20, size=32)
    P = KeyDistribution.from_probabilities([Fraction(int(c), int(counts.sum())) for c in counts], exact=True)
    known = [1, 3]
    rest = [0, 2, 4]
    prefix = marginal(P, known)
    total = [Fraction(0)] * 8
    for value in range(4):
        conditional = conditional_profile(P, {1: value & 1, 3: (value >> 1) & 1})
        for r in range(8):
            total[r] += prefix.prob(value) * conditional.prob(r)
    expected = marginal(P, rest)
    assert total == [expected.prob(r) for r in range(8)]


def test_marginal_of_uniform_is_uniform():
    M = marginal(KeyDistribution.uniform(6), [1, 3, 5])
    assert stat_distance(M, KeyDistribution.uniform(3)) == 0


def test_pushforward_of_constant_map_is_point_mass():
    P = KeyDistribution.uniform(4)
    image = pushforward(P, np.zeros(16, dtype=np.int64), 2)
    assert image.prob(0) == 1


# =============================================================================
# JOINT DISTRIBUTIONS
# =============================================================================

def test_independent_observation_carries_no_information():
    P = kpa_counterexample(4, 2)
    J = JointKY.product(P, [0.3, 0.7])
    assert mutual_information(J) == pytest.approx(0.0, abs=1e-12)
    assert conditional_entropy(J) == pytest.approx(entropy(P), abs=1e-12)


def test_identity_channel_reveals_key():
    P = KeyDistribution.uniform(3)
    J = JointKY.from_channel(P, np.eye(8))
    assert conditional_entropy(J) == pytest.approx(0.0, abs=1e-12)
    assert mutual_information(J) == pytest.approx(3.0)


# =============================================================================
# JSON
# =============================================================================

def test_dump_and_parse_preserve_kpa_counterexample():
    P = kpa_counterexample(8, 4)
    Q = parse_distribution(dump_distribution(P))
    assert stat_distance(P, Q) == 0


def test_parse_uniform_background():
    P = parse_distribution('{"n": 3, "atoms": [["100", "1/2"]], "background": "uniform"}')
    assert P.prob(1) == Fraction(1, 2)
    assert P.prob(0) == Fraction(1, 14)


def test_malformed_json_reports_position():
    with pytest.raises(DistributionParseError) as info:
        parse_distribution('{"n": 2,\n "atoms": [}')
    assert info.value.line == 2
    assert info.value.column is not None


def test_schema_violation_is_a_parse_error():
    with pytest.raises(DistributionParseError):
        parse_distribution('{"n": 2, "atoms": [["101", "1/2"]]}')


def test_negative_probability_in_document():
    with pytest.raises(InvalidDistributionError):
        parse_distribution('{"n": 2, "atoms": [["00", "-1/4"]]}')


def test_float_mode_parse():
    P = parse_distribution('{"n": 1, "atoms": [["0", 0.25], ["1", 0.75]]}', exact=False)
    assert not P.exact
    assert math.isclose(P.prob(1), 0.75)
