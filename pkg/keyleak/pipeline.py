"""
KeyLeak Pipeline

Protocol-round accounting: net key rate after error-correction costs,
expected leak projections under each guarantee model, and back-solving the
d level a failure target requires.

Per-block probabilities are carried as log2 values so that whole-block
figures such as 2^-100000 keep an exact security-bits column.
"""
import logging
import math
from typing import Optional

from . import bounds
from .exceptions import ParameterRangeError
from .models import LeakModel, LeakProjection, NetKeyRate, ProtocolParams, RequiredD

logger = logging.getLogger(__name__)

DAY_SECONDS = 86_400
AGE_OF_UNIVERSE_SECONDS = 4.35e17

# Largest float exponent kept when converting back from log2
_MAX_LOG2_FLOAT = 1023.0


def _from_log2(log2_value: Optional[float]) -> float:
    if log2_value is None or log2_value == -math.inf:
        return 0.0
    return 2.0 ** log2_value


# =============================================================================
# KEY RATE
# =============================================================================

def net_key_rate(params: ProtocolParams, systematic: bool = False) -> NetKeyRate:
    """
    Key rate after the parity bits revealed by error correction are covered
    with shared secret bits.

    Args:
        params: protocol parameters; key_len defaults to sifted_len
        systematic: use the self-covering systematic-code leak

    Returns:
        NetKeyRate with feasible False (and zero rate) when the leak
        consumes the whole key.
    """
    key_len = params.effective_key_len
    if systematic:
        leak = bounds.ecc_leak_systematic(params.sifted_len, params.qber).value
    else:
        leak = bounds.ecc_leak(params.sifted_len, params.qber, params.ecc_factor).value
    net = bounds.net_key_length(key_len, leak)
    net_rate = params.key_rate * net.value / key_len
    if not net.feasible:
        logger.warning(f"ECC leak {leak:.1f} bits consumes the whole {key_len}-bit key")
    return NetKeyRate(
        key_len=key_len,
        leak_bits=leak,
        net_key_len=net.value,
        key_rate=params.key_rate,
        net_rate=net_rate,
        systematic=systematic,
        feasible=net.feasible,
    )


# =============================================================================
# LEAK PROJECTIONS
# =============================================================================

def per_block_log2(params: ProtocolParams, model: LeakModel) -> Optional[float]:
    """log2 of the per-block compromise probability; None when it is zero"""
    model = LeakModel(model)
    d = params.d_level
    lo = params.leading_order
    if model == LeakModel.AVERAGE:
        return None if d == 0 else math.log2(d)
    if model == LeakModel.INDIVIDUAL:
        return bounds.individual_guarantee(d, leading_order=lo).log2_value
    if model == LeakModel.KPA_INDIVIDUAL:
        return bounds.kpa_individual_guarantee(d, leading_order=lo).log2_value
    if model == LeakModel.PER_BIT_FALLACY:
        return bounds.per_bit_fallacy(d, params.block_len).log2_value
    if model == LeakModel.UNIFORM_BASELINE:
        return float(-params.block_len)
    return float(-params.seed_key_bits)


def blocks_per_day(params: ProtocolParams) -> float:
    return params.key_rate * DAY_SECONDS / params.block_len


def leak_projection(params: ProtocolParams, model: LeakModel) -> LeakProjection:
    """
    Expected whole-block compromises per day under one guarantee model.

    The figures are expectations; they do not rule out an earlier leak.
    """
    model = LeakModel(model)
    per_day = blocks_per_day(params)
    log2_p = per_block_log2(params, model)
    p = _from_log2(log2_p)
    expected_blocks = per_day * p
    mean_time = None
    if log2_p is not None:
        log2_mean = math.log2(params.block_len / params.key_rate) - log2_p
        if log2_mean <= _MAX_LOG2_FLOAT:
            mean_time = 2.0 ** log2_mean
    projection = LeakProjection(
        model=model,
        params_name=params.name,
        blocks_per_day=per_day,
        per_block_probability=p,
        log2_per_block_probability=log2_p,
        expected_block_leaks_per_day=expected_blocks,
        expected_bit_leaks_per_day=expected_blocks * params.block_len,
        mean_time_to_leak_seconds=mean_time,
        security_bits=None if log2_p is None else -log2_p,
        flagged_incorrect=model == LeakModel.PER_BIT_FALLACY,
        guarantee_constants=params.guarantee_constants,
    )
    logger.debug(f"{params.name}/{model.value}: {expected_blocks:.6g} block leaks per day")
    return projection


# =============================================================================
# REQUIRED d
# =============================================================================

def required_d(
    target_probability: float,
    horizon_seconds: float = DAY_SECONDS,
    params: Optional[ProtocolParams] = None,
    model: LeakModel = LeakModel.INDIVIDUAL,
    blocks_in_horizon: Optional[float] = None,
) -> RequiredD:
    """
    Largest d keeping the expected number of compromised blocks over the
    horizon at or below ``target_probability``.

    Args:
        target_probability: tolerated expected compromises, in (0, 1]
        horizon_seconds: horizon length, used with params to count blocks
        params: protocol parameters (block length, key rate, constants)
        model: guarantee model to invert
        blocks_in_horizon: block count override

    Raises:
        ParameterRangeError: for the flagged per-bit model or a bad target.
    """
    model = LeakModel(model)
    params = params or ProtocolParams()
    if model == LeakModel.PER_BIT_FALLACY:
        raise ParameterRangeError("the per-bit failure reading is incorrect and cannot be inverted")
    if not 0.0 < target_probability:
        raise ParameterRangeError(f"target probability must be positive, got {target_probability}")
    if blocks_in_horizon is None:
        blocks_in_horizon = params.key_rate * horizon_seconds / params.block_len
    if blocks_in_horizon <= 0:
        raise ParameterRangeError(f"blocks in horizon must be positive, got {blocks_in_horizon}")
    per_block = target_probability / blocks_in_horizon

    if model in (LeakModel.UNIFORM_BASELINE, LeakModel.SYMMETRIC_CIPHER_BASELINE):
        floor_bits = params.block_len if model == LeakModel.UNIFORM_BASELINE else params.seed_key_bits
        floor = 2.0 ** -floor_bits
        return RequiredD(
            model=model,
            target_probability=target_probability,
            blocks_in_horizon=blocks_in_horizon,
            per_block_target=per_block,
            d=None,
            d_independent=True,
            floor_probability=floor,
            meets_target=blocks_in_horizon * floor <= target_probability,
        )

    if target_probability >= 1.0 or per_block >= 1.0:
        d = 1.0
        clamped = True
    else:
        lo = params.leading_order
        if model == LeakModel.AVERAGE:
            d = per_block
        elif model == LeakModel.INDIVIDUAL:
            d = (per_block / (1 if lo else 2)) ** 2
        else:
            d = (per_block / (1 if lo else 3)) ** 3
        clamped = False
    logger.info(f"{model.value}: target {target_probability:g} over {blocks_in_horizon:g} blocks needs d <= {d:.3g}")
    return RequiredD(
        model=model,
        target_probability=target_probability,
        blocks_in_horizon=blocks_in_horizon,
        per_block_target=per_block,
        d=d,
        clamped=clamped,
    )
