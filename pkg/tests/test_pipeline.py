"""Tests for keyleak.pipeline"""
import math

import pytest

from keyleak.exceptions import ParameterRangeError
from keyleak.models import LeakModel, ProtocolParams
from keyleak.pipeline import (
    DAY_SECONDS,
    blocks_per_day,
    leak_projection,
    net_key_rate,
    required_d,
)

THEORY = ProtocolParams(name="theory", block_len=100_000, d_level=1e-9, key_rate=1e7)
EXPERIMENT = ProtocolParams(name="experiment", block_len=100_000, d_level=4e-9, key_rate=1.4e5)


# =============================================================================
# KEY RATE
# =============================================================================

def test_error_free_channel_keeps_rate():
    rate = net_key_rate(ProtocolParams())
    assert rate.leak_bits == 0
    assert rate.net_rate == pytest.approx(1e7)
    assert rate.feasible


def test_ecc_leak_is_deducted():
    rate = net_key_rate(ProtocolParams(qber=0.02))
    assert rate.leak_bits == pytest.approx(14_144, abs=2)
    assert rate.net_key_len == pytest.approx(100_000 - rate.leak_bits)
    assert net_key_rate(ProtocolParams(qber=0.02), systematic=True).net_rate < rate.net_rate


def test_leak_larger_than_key_is_infeasible():
    rate = net_key_rate(ProtocolParams(qber=0.45, ecc_factor=2.0))
    assert not rate.feasible
    assert rate.net_rate == 0


# =============================================================================
# PROJECTIONS
# =============================================================================

def test_blocks_per_day():
    assert blocks_per_day(THEORY) == pytest.approx(8.64e6)


def test_theory_point_average_model():
    projection = leak_projection(THEORY, LeakModel.AVERAGE)
    assert 30 <= projection.mean_time_to_leak_days <= 320
    assert projection.expectation_caveat


def test_theory_point_individual_model():
    projection = leak_projection(THEORY, LeakModel.INDIVIDUAL)
    assert 100 <= projection.expected_block_leaks_per_day <= 1000


def test_theory_point_known_plaintext_model():
    projection = leak_projection(THEORY, LeakModel.KPA_INDIVIDUAL)
    assert 3 <= projection.mean_time_to_leak_seconds <= 32


def test_experiment_point():
    assert 2 <= leak_projection(EXPERIMENT, LeakModel.INDIVIDUAL).expected_block_leaks_per_day <= 20
    kpa = leak_projection(EXPERIMENT, LeakModel.KPA_INDIVIDUAL).expected_block_leaks_per_day
    assert kpa == pytest.approx(576, rel=0.01)
    leading = EXPERIMENT.model_copy(update={"guarantee_constants": "leading-order"})
    assert 30 <= leak_projection(leading, LeakModel.KPA_INDIVIDUAL).expected_block_leaks_per_day <= 320


def test_uniform_baseline_keeps_security_bits():
    projection = leak_projection(THEORY, LeakModel.UNIFORM_BASELINE)
    assert projection.per_block_probability == 0.0
    assert projection.security_bits == 100_000
    assert projection.mean_time_to_leak_seconds is None


def test_cipher_baseline():
    projection = leak_projection(THEORY, LeakModel.SYMMETRIC_CIPHER_BASELINE)
    assert projection.per_block_probability == 2.0 ** -128
    assert projection.security_bits == 128


def test_per_bit_projection_is_flagged():
    projection = leak_projection(THEORY, LeakModel.PER_BIT_FALLACY)
    assert projection.flagged_incorrect
    assert projection.log2_per_block_probability == pytest.approx(100_000 * math.log2(1e-14))


def test_zero_d_never_leaks_on_average():
    projection = leak_projection(THEORY.model_copy(update={"d_level": 0.0}), LeakModel.AVERAGE)
    assert projection.expected_block_leaks_per_day == 0
    assert projection.security_bits is None


# =============================================================================
# REQUIRED d
# =============================================================================

def test_required_d_for_a_daily_target():
    result = required_d(1e-15, DAY_SECONDS, model=LeakModel.INDIVIDUAL, blocks_in_horizon=1e7)
    assert result.d == pytest.approx(2.5e-45)
    assert 1e-45 <= result.d <= 1e-43


def test_required_d_inverts_each_model():
    params = THEORY
    for model, guarantee in (
        (LeakModel.AVERAGE, lambda d: d),
        (LeakModel.INDIVIDUAL, lambda d: 2 * d ** 0.5),
        (LeakModel.KPA_INDIVIDUAL, lambda d: 3 * d ** (1 / 3)),
    ):
        result = required_d(1e-3, params=params, model=model)
        assert result.blocks_in_horizon * guarantee(result.d) == pytest.approx(1e-3)


def test_required_d_leading_order():
    params = THEORY.model_copy(update={"guarantee_constants": "leading-order"})
    result = required_d(1e-6, params=params, model=LeakModel.INDIVIDUAL, blocks_in_horizon=1)
    assert result.d == pytest.approx(1e-12)


def test_required_d_clamps_at_one():
    result = required_d(1.0, model=LeakModel.KPA_INDIVIDUAL)
    assert result.d == 1.0
    assert result.clamped


def test_baselines_do_not_depend_on_d():
    result = required_d(1e-15, params=THEORY, model=LeakModel.SYMMETRIC_CIPHER_BASELINE)
    assert result.d is None
    assert result.d_independent
    assert result.floor_probability == 2.0 ** -128
    assert result.meets_target


def test_per_bit_reading_cannot_be_inverted():
    with pytest.raises(ParameterRangeError):
        required_d(1e-15, model=LeakModel.PER_BIT_FALLACY)


def test_required_d_rejects_bad_target():
    with pytest.raises(ParameterRangeError):
        required_d(0.0)


@pytest.mark.parametrize("d", [1e-12, 1e-6, 0.3, 1.0])
def test_models_ordered_by_pessimism(d):
    params = THEORY.model_copy(update={"d_level": d})
    order = [LeakModel.PER_BIT_FALLACY, LeakModel.AVERAGE, LeakModel.INDIVIDUAL, LeakModel.KPA_INDIVIDUAL]
    values = [leak_projection(params, model).per_block_probability for model in order]
    assert values == sorted(values)


@pytest.mark.parametrize("model", [LeakModel.AVERAGE, LeakModel.INDIVIDUAL, LeakModel.KPA_INDIVIDUAL])
def test_required_d_round_trips_through_projection(model):
    target = 1e-6
    result = required_d(target, DAY_SECONDS, params=THEORY, model=model)
    projection = leak_projection(THEORY.model_copy(update={"d_level": result.d}), model)
    assert projection.expected_block_leaks_per_day == pytest.approx(target, rel=0.01)
