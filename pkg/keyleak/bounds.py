"""
KeyLeak Bounds

Closed-form evaluators for every security bound, returning BoundResult
records. Two formulas are wrong and kept only for comparison:
per_bit_fallacy and ber_fallacy_bound carry the flagged-incorrect flag.

Probabilities clamp to [0, 1] and record the clamp. Values that underflow a
float (2^-100000) keep their exponent in log2_value.
"""
import logging
import math
from fractions import Fraction
from typing import Any, Callable, Dict, Optional, Sequence

import numpy as np

from .distributions import (
    KeyDistribution,
    Number,
    binary_entropy,
    inverse_binary_entropy,
    log2_number,
    ordered_profile,
)
from .exceptions import ParameterRangeError, VacuousBoundError
from .models import BoundFlag, BoundResult

logger = logging.getLogger(__name__)


def _check_probability(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ParameterRangeError(f"{name} must lie in [0, 1], got {value}")
    return value


def _check_delta(name: str, value: Number) -> Number:
    """Like _check_probability but keeps a Fraction exact"""
    if isinstance(value, Fraction):
        if not 0 <= value <= 1:
            raise ParameterRangeError(f"{name} must lie in [0, 1], got {value}")
        return value
    return _check_probability(name, value)


def _log2(value: float) -> float:
    return -math.inf if value <= 0 else math.log2(value)


def _probability_result(
    formula: str,
    log2_value: float,
    inputs: Dict[str, Any],
    flag: BoundFlag = BoundFlag.VALID,
    details: Optional[Dict[str, Any]] = None,
    exact_value: Optional[Fraction] = None,
) -> BoundResult:
    if exact_value is not None:
        details = {**(details or {}), "exact_value": str(min(exact_value, Fraction(1)))}
        if exact_value >= 1:
            log2_value = 0.0 if exact_value == 1 else 1.0
        else:
            return BoundResult(
                formula=formula,
                value=float(exact_value),
                log2_value=log2_number(exact_value) if exact_value > 0 else None,
                inputs=inputs,
                flag=flag,
                details=details,
            )
    clamped = log2_value > 0
    if clamped:
        log2_value = 0.0
    value = 0.0 if log2_value == -math.inf else 2.0 ** log2_value
    return BoundResult(
        formula=formula,
        value=value,
        log2_value=None if log2_value == -math.inf else log2_value,
        inputs=inputs,
        flag=flag,
        clamped=clamped,
        details=details or {},
    )


def _segment_log2(bits: int, delta: Number) -> float:
    """log2(2^-bits + delta)"""
    if delta <= 0:
        return float(-bits)
    if isinstance(delta, Fraction):
        return log2_number(Fraction(1, 1 << bits) + delta)
    return float(np.logaddexp2(-float(bits), math.log2(delta)))


def _segment_result(
    formula: str,
    bits: int,
    delta: Number,
    inputs: Dict[str, Any],
    details: Optional[Dict[str, Any]] = None,
) -> BoundResult:
    """2^-bits + delta, exact when delta is a Fraction"""
    exact = Fraction(1, 1 << bits) + delta if isinstance(delta, Fraction) else None
    return _probability_result(
        formula, _segment_log2(bits, delta), inputs, details=details, exact_value=exact
    )


# =============================================================================
# SEGMENT LEAKS
# =============================================================================

def subset_leak_bound(subset_len: int, delta: Number) -> BoundResult:
    """Eve's best chance of guessing any subset of the key: 2^-|K*| + delta"""
    if subset_len < 1:
        raise ParameterRangeError(f"subset_len must be at least 1, got {subset_len}")
    delta = _check_delta("delta", delta)
    return _segment_result("subset_leak", subset_len, delta, {"subset_len": subset_len, "delta": float(delta)})


def multi_segment_bound(segment_lens: Sequence[int], delta: Number) -> BoundResult:
    """m disjoint segments guessed together: 2^-sum(lens) + delta"""
    lens = [int(s) for s in segment_lens]
    if not lens or any(s < 1 for s in lens):
        raise ParameterRangeError(f"segment lengths must be positive, got {lens}")
    delta = _check_delta("delta", delta)
    return _segment_result(
        "multi_segment",
        sum(lens),
        delta,
        {"segment_lens": lens, "delta": float(delta)},
        details={"total_bits": sum(lens), "segments": len(lens)},
    )


def total_compromise_bound(n: int, delta: Number) -> BoundResult:
    """Whole-key guess: 2^-n + delta"""
    if n < 1:
        raise ParameterRangeError(f"n must be at least 1, got {n}")
    delta = _check_delta("delta", delta)
    return _segment_result("total_compromise", n, delta, {"n": n, "delta": float(delta)})


def kpa_average_bound(subset_len: int, delta: Number) -> BoundResult:
    """
    Known-plaintext version of the subset bound. Holds on average over the
    revealed part K1, not for each value of K1.
    """
    if subset_len < 1:
        raise ParameterRangeError(f"subset_len must be at least 1, got {subset_len}")
    delta = _check_delta("delta", delta)
    return _segment_result(
        "kpa_average",
        subset_len,
        delta,
        {"subset_len": subset_len, "delta": float(delta)},
        details={"guarantee": "average over the known part"},
    )


def multi_block_segment_bound(segment_lens: Sequence[int], delta: Number) -> BoundResult:
    """Segments in independent blocks, each with its own d level: product of per-block bounds"""
    lens = [int(s) for s in segment_lens]
    if not lens or any(s < 1 for s in lens):
        raise ParameterRangeError(f"segment lengths must be positive, got {lens}")
    delta = _check_delta("delta", delta)
    exact = None
    if isinstance(delta, Fraction):
        exact = Fraction(1)
        for s in lens:
            exact *= min(Fraction(1), Fraction(1, 1 << s) + delta)
    total = sum(min(0.0, _segment_log2(s, delta)) for s in lens)
    return _probability_result(
        "multi_block_segment",
        total,
        {"segment_lens": lens, "delta": float(delta)},
        details={"blocks": len(lens)},
        exact_value=exact,
    )


# =============================================================================
# AVERAGE TO INDIVIDUAL
# =============================================================================

def markov_tail(mean: float, gamma: float) -> BoundResult:
    """P(X >= gamma) <= mean / gamma for non-negative X"""
    mean = float(mean)
    gamma = float(gamma)
    if mean < 0:
        raise ParameterRangeError(f"mean must be non-negative, got {mean}")
    if gamma <= 0:
        raise ParameterRangeError(f"gamma must be positive, got {gamma}")
    ratio = mean / gamma
    return BoundResult(
        formula="markov_tail",
        value=min(1.0, ratio),
        log2_value=None if ratio == 0 else min(0.0, math.log2(ratio)),
        inputs={"mean": mean, "gamma": gamma},
        clamped=ratio > 1.0,
    )


def staged_markov_guarantee(epsilon: float, stages: int, leading_order: bool = False) -> BoundResult:
    """
    Individual guarantee after ``stages`` nested averages, each converted with
    the Markov inequality at the optimal split: stages * epsilon^(1/stages).
    ``leading_order`` drops the constant factor.
    """
    epsilon = _check_probability("epsilon", epsilon)
    if stages < 1:
        raise ParameterRangeError(f"stages must be at least 1, got {stages}")
    constant = 1 if leading_order else stages
    log2_value = -math.inf if epsilon == 0 else math.log2(constant) + math.log2(epsilon) / stages
    return _probability_result(
        "staged_markov",
        log2_value,
        {"epsilon": epsilon, "stages": stages, "leading_order": leading_order},
    )


def individual_guarantee(epsilon: float, leading_order: bool = False) -> BoundResult:
    """Probability bound for a single round: 2 * epsilon^(1/2)"""
    result = staged_markov_guarantee(epsilon, 2, leading_order)
    return result.model_copy(update={"formula": "individual_guarantee"})


def kpa_individual_guarantee(epsilon: float, leading_order: bool = False) -> BoundResult:
    """Single-round bound under known plaintext: 3 * epsilon^(1/3)"""
    result = staged_markov_guarantee(epsilon, 3, leading_order)
    return result.model_copy(update={"formula": "kpa_individual_guarantee"})


# =============================================================================
# BIT ERROR RATE
# =============================================================================

def fano_ber_bound(n: int, epsilon: float, info_leak: float = 0.0) -> BoundResult:
    """
    Lower bound on Eve's optimal bit error rate.

    Solves n * H2(pb) = n - 2 eps (n + log2(1/(2 eps))) - info_leak for the
    smaller root. info_leak defaults to 0 (the leak is neglected against H(K)).

    Raises:
        VacuousBoundError: when the entropy lower bound is not positive.
    """
    if n < 1:
        raise ParameterRangeError(f"n must be at least 1, got {n}")
    epsilon = _check_probability("epsilon", epsilon)
    if info_leak < 0:
        raise ParameterRangeError(f"info_leak must be non-negative, got {info_leak}")
    if epsilon == 0:
        entropy_floor = float(n) - info_leak
    else:
        entropy_floor = n - 2 * epsilon * (n + math.log2(1.0 / (2 * epsilon))) - info_leak
    if entropy_floor <= 0:
        raise VacuousBoundError(
            f"entropy lower bound {entropy_floor:.6g} is not positive for n={n}, epsilon={epsilon}"
        )
    pb = inverse_binary_entropy(min(1.0, entropy_floor / n))
    return BoundResult(
        formula="fano_ber",
        value=pb,
        log2_value=_log2(pb) if pb > 0 else None,
        inputs={"n": n, "epsilon": epsilon, "info_leak": info_leak},
        details={"entropy_floor": entropy_floor},
    )


def ber_fallacy_bound(d: float) -> BoundResult:
    """(1 - d)/2, an incorrect BER bound; kept for comparison only"""
    d = _check_probability("d", d)
    value = (1.0 - d) / 2
    return BoundResult(
        formula="ber_fallacy",
        value=value,
        log2_value=_log2(value) if value > 0 else None,
        inputs={"d": d},
        flag=BoundFlag.FLAGGED_INCORRECT,
    )


def pinsker_band(delta: float, n: int) -> BoundResult:
    """
    Band for I_E = n - H(K) given delta: (2 delta^2, 8 n delta + 2 H2(2 delta)).

    The upper branch exists only for 2 delta <= 1; otherwise only the lower
    end is reported.
    """
    delta = _check_probability("delta", delta)
    if n < 1:
        raise ParameterRangeError(f"n must be at least 1, got {n}")
    lower = 2 * delta * delta
    upper = None
    if 2 * delta <= 1:
        upper = 8 * n * delta + 2 * binary_entropy(2 * delta)
    return BoundResult(
        formula="pinsker_band",
        value=lower,
        inputs={"delta": delta, "n": n},
        details={"lower": lower, "upper": upper, "upper_in_domain": upper is not None},
    )


# =============================================================================
# PRIVACY AMPLIFICATION AND ERROR CORRECTION
# =============================================================================

def lhl_key_length(min_entropy_bits: float, d_target: float) -> BoundResult:
    """Longest output with d <= d_target: floor(l - 2 log2(1/d_target))"""
    if min_entropy_bits <= 0:
        raise ParameterRangeError(f"min-entropy must be positive, got {min_entropy_bits}")
    d_target = float(d_target)
    if not 0 < d_target <= 1:
        raise ParameterRangeError(f"d_target must lie in (0, 1], got {d_target}")
    raw = min_entropy_bits - 2 * math.log2(1.0 / d_target)
    length = math.floor(raw + 1e-9)
    feasible = length >= 0
    return BoundResult(
        formula="lhl_key_length",
        value=float(max(0, length)),
        inputs={"min_entropy_bits": min_entropy_bits, "d_target": d_target},
        feasible=feasible,
        details={"raw_length": raw},
    )


def lhl_min_d(p1: Number) -> BoundResult:
    """Smallest d reachable by hashing K': p1(K')^(1/2)"""
    if not 0 < p1 <= 1:
        raise ParameterRangeError(f"p1 must lie in (0, 1], got {p1}")
    return _probability_result("lhl_min_d", log2_number(p1) / 2, {"p1": float(p1)})


def lhl_near_perfect_length(min_entropy_bits: float) -> BoundResult:
    """Output length m at which the hashed key's d equals 2^-m: floor(l/3)"""
    if min_entropy_bits < 0:
        raise ParameterRangeError(f"min-entropy must be non-negative, got {min_entropy_bits}")
    return BoundResult(
        formula="lhl_near_perfect_length",
        value=float(math.floor(min_entropy_bits / 3 + 1e-9)),
        inputs={"min_entropy_bits": min_entropy_bits},
    )


def _check_qber(qber: float) -> float:
    qber = float(qber)
    if not 0.0 <= qber < 0.5:
        raise ParameterRangeError(f"qber must lie in [0, 0.5), got {qber}")
    return qber


def ecc_leak(sifted_len: int, qber: float, f: float = 1.0) -> BoundResult:
    """Parity bits revealed by error correction: f * |K''| * H2(qber)"""
    qber = _check_qber(qber)
    if not 1.0 <= f <= 2.0:
        raise ParameterRangeError(f"ecc efficiency f must lie in [1, 2], got {f}")
    if sifted_len < 1:
        raise ParameterRangeError(f"sifted_len must be positive, got {sifted_len}")
    return BoundResult(
        formula="ecc_leak",
        value=f * sifted_len * binary_entropy(qber),
        inputs={"sifted_len": sifted_len, "qber": qber, "f": f},
    )


def ecc_leak_systematic(sifted_len: int, qber: float) -> BoundResult:
    """Leak for a systematic code covering its own parity: |K''| h / (1 - h)"""
    qber = _check_qber(qber)
    if sifted_len < 1:
        raise ParameterRangeError(f"sifted_len must be positive, got {sifted_len}")
    h = binary_entropy(qber)
    if h >= 1.0:
        raise ParameterRangeError("systematic leak undefined when H2(qber) = 1")
    return BoundResult(
        formula="ecc_leak_systematic",
        value=sifted_len * h / (1.0 - h),
        inputs={"sifted_len": sifted_len, "qber": qber},
    )


def net_key_length(key_len: int, leak_bits: float) -> BoundResult:
    """Key left after covering the ECC leak: |K| - leak, floored at zero"""
    net = key_len - leak_bits
    return BoundResult(
        formula="net_key_length",
        value=max(0.0, float(net)),
        inputs={"key_len": key_len, "leak_bits": leak_bits},
        feasible=net > 0,
    )


# =============================================================================
# AUTHENTICATION
# =============================================================================

def mac_bounds(
    epsilon_asu: float,
    epsilon_key: float,
    tag_space: int,
    m_uses: int = 1,
    epsilon_key_per_use: Optional[float] = None,
) -> BoundResult:
    """
    Substitution bounds for an epsilon-ASU family keyed by an imperfect key.

    ``tag_space`` is the number of possible tags. The bit-length reading of
    the tag parameter is also reported under details["bit_length_reading"].
    The result value is the average substitution bound epsilon + epsilon'.
    """
    eps = _check_probability("epsilon_asu", epsilon_asu)
    eps_key = _check_probability("epsilon_key", epsilon_key)
    eps_use = eps_key if epsilon_key_per_use is None else _check_probability("epsilon_key_per_use", epsilon_key_per_use)
    if tag_space < 2:
        raise ParameterRangeError(f"tag_space must be at least 2, got {tag_space}")
    if m_uses < 1:
        raise ParameterRangeError(f"m_uses must be at least 1, got {m_uses}")
    p_s_avg = eps + eps_key
    tag_bits = math.log2(tag_space)
    details = {
        "p_s_max": min(1.0, eps + eps_key * tag_space),
        "p_s_avg": min(1.0, p_s_avg),
        "p_I_avg": min(1.0, p_s_avg),
        "p_s_multiuse": min(1.0, eps + m_uses * eps_use),
        "epsilon_floor": 1.0 / tag_space,
        "bit_length_reading": {
            "p_s_max": min(1.0, eps + eps_key * tag_bits),
            "epsilon_floor": 1.0 / tag_bits,
        },
    }
    return BoundResult(
        formula="mac_bounds",
        value=min(1.0, p_s_avg),
        log2_value=_log2(min(1.0, p_s_avg)) if p_s_avg > 0 else None,
        inputs={
            "epsilon_asu": eps,
            "epsilon_key": eps_key,
            "tag_space": tag_space,
            "m_uses": m_uses,
            "epsilon_key_per_use": eps_use,
        },
        clamped=p_s_avg > 1.0,
        details=details,
    )


def mac_equivalent_d(tag_bits: int, stages: int = 3) -> BoundResult:
    """d level at which the staged individual guarantee reaches 2^-tag_bits"""
    if tag_bits < 1:
        raise ParameterRangeError(f"tag_bits must be positive, got {tag_bits}")
    log2_d = stages * (-tag_bits - math.log2(stages))
    return _probability_result("mac_equivalent_d", log2_d, {"tag_bits": tag_bits, "stages": stages})


# =============================================================================
# GUESSING AND BASELINES
# =============================================================================

def complexity_success(trials: int, keyspace: int) -> BoundResult:
    """Success of M distinct guesses against a uniform key: M/N"""
    trials = int(trials)
    keyspace = int(keyspace)
    if keyspace < 1 or not 0 <= trials <= keyspace:
        raise ParameterRangeError(f"need 0 <= M <= N with N >= 1, got M={trials}, N={keyspace}")
    log2_value = -math.inf if trials == 0 else math.log2(trials) - math.log2(keyspace)
    return _probability_result("complexity_success", log2_value, {"trials": trials, "keyspace": keyspace})


def guessing_success(P: KeyDistribution, trials: int) -> BoundResult:
    """Success of the M best guesses against a known profile: sum of the M largest p_i"""
    if not 0 <= trials <= P.size:
        raise ParameterRangeError(f"trials must lie in [0, {P.size}], got {trials}")
    total = ordered_profile(P).cumulative(trials)
    return _probability_result(
        "guessing_success", log2_number(total), {"n": P.n, "trials": trials}
    )


def per_bit_fallacy(d: float, n: int) -> BoundResult:
    """(d/n)^n, the incorrect per-bit failure reading; comparison only"""
    d = _check_probability("d", d)
    if n < 1:
        raise ParameterRangeError(f"n must be at least 1, got {n}")
    log2_value = -math.inf if d == 0 else n * (math.log2(d) - math.log2(n))
    return _probability_result(
        "per_bit_fallacy",
        log2_value,
        {"d": d, "n": n},
        flag=BoundFlag.FLAGGED_INCORRECT,
        details={"correct_total_compromise": total_compromise_bound(n, d).value},
    )


def lfsr_whole_key_leak(seed_bits: int) -> BoundResult:
    """Whole running-key leak of a non-degenerate LFSR: 2^-seed_bits"""
    if seed_bits < 1:
        raise ParameterRangeError(f"seed_bits must be positive, got {seed_bits}")
    return _probability_result("lfsr_whole_key_leak", float(-seed_bits), {"seed_bits": seed_bits})


# Name -> evaluator for the CLI ``bound`` subcommand
BOUND_REGISTRY: Dict[str, Callable[..., BoundResult]] = {
    "subset_leak_bound": subset_leak_bound,
    "multi_segment_bound": multi_segment_bound,
    "multi_block_segment_bound": multi_block_segment_bound,
    "total_compromise_bound": total_compromise_bound,
    "kpa_average_bound": kpa_average_bound,
    "markov_tail": markov_tail,
    "staged_markov_guarantee": staged_markov_guarantee,
    "individual_guarantee": individual_guarantee,
    "kpa_individual_guarantee": kpa_individual_guarantee,
    "fano_ber_bound": fano_ber_bound,
    "ber_fallacy_bound": ber_fallacy_bound,
    "pinsker_band": pinsker_band,
    "lhl_key_length": lhl_key_length,
    "lhl_min_d": lhl_min_d,
    "lhl_near_perfect_length": lhl_near_perfect_length,
    "ecc_leak": ecc_leak,
    "ecc_leak_systematic": ecc_leak_systematic,
    "net_key_length": net_key_length,
    "mac_bounds": mac_bounds,
    "mac_equivalent_d": mac_equivalent_d,
    "complexity_success": complexity_success,
    "guessing_success": guessing_success,
    "per_bit_fallacy": per_bit_fallacy,
    "lfsr_whole_key_leak": lfsr_whole_key_leak,
}
