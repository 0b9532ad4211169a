"""Tests for keyleak.primitives"""
from fractions import Fraction

import numpy as np
import pytest

from keyleak.distributions import KeyDistribution, min_entropy, ordered_profile, stat_distance
from keyleak.exceptions import (
    BudgetExceededError,
    DegenerateSeedError,
    ParameterRangeError,
    UndefinedAttackError,
)
from keyleak.primitives import (
    LfsrSpec,
    MacFamily,
    ToeplitzMatrix,
    bits_to_int,
    gf2_rank,
    gf_multiplication_table,
    gf_multiply,
    int_to_bits,
    lfsr_keystream,
    lfsr_keystreams,
    lfsr_period,
    lfsr_running_key_distribution,
    lfsr_state_after,
    lfsr_window_counts,
    linear_map_all_keys,
    mac_epsilon,
    mac_impersonation_success,
    mac_tag,
    otp_decrypt,
    otp_encrypt,
    tag_table,
    toeplitz_hash,
)


# =============================================================================
# ONE-TIME PAD
# =============================================================================

def test_otp_string_round():
    assert otp_encrypt("1010", "0110") == "1100"
    assert otp_decrypt("1100", "0110") == "1010"


def test_otp_arrays():
    y = otp_encrypt(np.array([1, 1, 0]), np.array([1, 0, 0]))
    assert y.tolist() == [0, 1, 0]


def test_otp_length_mismatch():
    with pytest.raises(ParameterRangeError):
        otp_encrypt("101", "10")


def test_bit_order_is_little_endian():
    assert int_to_bits(6, 4).tolist() == [0, 1, 1, 0]
    assert bits_to_int("0110") == 6


# =============================================================================
# TOEPLITZ
# =============================================================================

def test_identity_hash_is_identity():
    T = ToeplitzMatrix.identity(5)
    assert T.full_rank
    assert toeplitz_hash("10011", T) == "10011"


def test_toeplitz_constant_diagonals(rng):
    A = ToeplitzMatrix.random(4, 6, rng).to_array()
    assert (A[1:, 1:] == A[:-1, :-1]).all()


def test_toeplitz_needs_every_diagonal():
    with pytest.raises(ParameterRangeError):
        ToeplitzMatrix(2, 3, (1, 0, 1))


def test_documented_four_by_eight_hash():
    # diagonal t sits at entry(i, j) with i - j + 7 = t
    T = ToeplitzMatrix(4, 8, (1, 0, 1, 1, 0, 0, 1, 0, 1, 1, 1))
    A = T.to_array()
    assert A[0].tolist() == [0, 1, 0, 0, 1, 1, 0, 1]
    assert A[:, 0].tolist() == [0, 1, 1, 1]
    assert toeplitz_hash("10110001", T) == "1011"
    assert toeplitz_hash("11010010", T) == "1000"
    assert toeplitz_hash("00000000", T) == "0000"


def test_toeplitz_linearity_and_shape(rng):
    for _ in range(1000):
        rows, cols = (int(v) for v in rng.integers(1, 12, size=2))
        T = ToeplitzMatrix.random(rows, cols, rng)
        x, y = rng.integers(0, 2, size=(2, cols))
        assert T.to_array().shape == (rows, cols)
        hx, hy = T.hash(x), T.hash(y)
        assert hx.shape == (rows,)
        assert (T.hash(x ^ y) == hx ^ hy).all()


def test_gf2_rank():
    assert gf2_rank(np.array([[1, 1], [1, 1]])) == 1
    assert gf2_rank(np.eye(3, dtype=np.uint8)) == 3
    assert gf2_rank(np.zeros((2, 4), dtype=np.uint8)) == 0


def test_linear_map_matches_hash():
    T = ToeplitzMatrix.from_int(3, 5, 0b1011001)
    images = linear_map_all_keys(T.to_array())
    for key in range(32):
        assert images[key] == bits_to_int(T.hash(int_to_bits(key, 5)))


def test_family_enumeration_size_and_budget():
    assert sum(1 for _ in ToeplitzMatrix.enumerate_family(2, 3)) == 16
    with pytest.raises(BudgetExceededError):
        next(ToeplitzMatrix.enumerate_family(13, 13))


# =============================================================================
# LFSR
# =============================================================================

def test_maximal_lfsr_period():
    spec = LfsrSpec.maximal(4)
    assert lfsr_period(spec, 1) == 15
    assert lfsr_period(spec, 0) == 1


def test_keystream_starts_with_seed():
    spec = LfsrSpec.maximal(4)
    assert lfsr_keystream(spec, 6, 4).tolist() == int_to_bits(6, 4).tolist()


def test_keystream_satisfies_recurrence():
    spec = LfsrSpec.from_exponents(4, (4, 3, 0))
    s = lfsr_keystream(spec, 9, 30)
    for t in range(26):
        assert s[t + 4] == s[t] ^ s[t + 3]


def test_zero_seed_is_degenerate():
    with pytest.raises(DegenerateSeedError):
        lfsr_keystream(LfsrSpec.maximal(4), 0, 8)


def test_distinct_seeds_give_distinct_prefixes():
    spec = LfsrSpec.maximal(8)
    streams = lfsr_keystreams(spec, np.arange(1, 256), 8)
    assert len({tuple(row) for row in streams.tolist()}) == 255
    longer = lfsr_keystreams(spec, np.arange(1, 256), 20)
    assert len({tuple(row) for row in longer.tolist()}) == 255


def test_feedback_without_constant_term_rejected():
    with pytest.raises(ParameterRangeError):
        LfsrSpec(4, 0b11000)


@pytest.mark.parametrize("offset", [0, 3, 11])
def test_window_of_seed_length_covers_nonzero_patterns(offset):
    counts = lfsr_window_counts(LfsrSpec.maximal(4), 4, offset)
    assert counts[0] == 0
    assert (counts[1:] == 1).all()


def test_running_key_with_zero_seed_is_uniform_on_seed_bits():
    P = lfsr_running_key_distribution(LfsrSpec.maximal(4), 4, include_zero_seed=True)
    assert stat_distance(P, KeyDistribution.uniform(4)) == 0


def test_running_key_longer_than_seed():
    P = lfsr_running_key_distribution(LfsrSpec.maximal(4), 10)
    assert ordered_profile(P).p1 == Fraction(1, 15)
    assert min_entropy(P) == pytest.approx(np.log2(15))


# =============================================================================
# MAC
# =============================================================================

def test_gf_arithmetic():
    assert gf_multiply(2, 2, 2) == 3
    table = gf_multiplication_table(3)
    assert (table == table.T).all()
    assert table[1].tolist() == list(range(8))


def test_mac_tag_value():
    family = MacFamily(2, 1)
    # x = 2, s = 1
    assert mac_tag(family, 2 | (1 << 2), 2) == 2


def test_single_block_epsilon_is_exact():
    assert mac_epsilon(MacFamily(3, 1)) == Fraction(1, 8)


def test_two_block_epsilon_within_bound():
    family = MacFamily(3, 2)
    assert mac_epsilon(family) <= family.epsilon_bound


def test_single_message_has_no_substitution():
    with pytest.raises(UndefinedAttackError):
        mac_epsilon(MacFamily(2, 0))


def test_uniform_key_impersonation():
    assert mac_impersonation_success(MacFamily(3, 1)) == pytest.approx(1 / 8)


def test_tag_table_budget():
    assert tag_table(MacFamily(2, 1)).shape == (16, 4)
    with pytest.raises(BudgetExceededError):
        tag_table(MacFamily(8, 2))


def test_state_after_full_period_returns_to_seed():
    spec = LfsrSpec.maximal(4)
    assert lfsr_state_after(spec, 5, 15) == 5
    later = lfsr_state_after(spec, 5, 3)
    assert lfsr_keystream(spec, later, 6).tolist() == lfsr_keystream(spec, 5, 9)[3:].tolist()
