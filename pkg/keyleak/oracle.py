"""
KeyLeak Oracle

Brute-force ground truth: exact attacker success quantities by full
enumeration on small instances, and the sweeps that check every bound
against them (soundness) or confirm that the flagged formulas fail
(refutation).

Sweeps are deterministic: instance i of a sweep draws its randomness from
np.random.default_rng([seed, i]), so reports do not depend on worker count.
"""
import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import bounds
from .constructions import (
    ber_counterexample_search,
    greedy_coupling,
    kpa_counterexample,
    maximal_coupling,
    mixture_feasibility,
    saturating_distribution,
    spiked_distribution,
)
from .distributions import (
    TOLERANCE,
    KeyDistribution,
    Number,
    _check_positions,
    _rescale,
    extract_bits,
    information_leak,
    min_entropy,
    optimal_ber,
    stat_distance,
    to_fraction,
)
from .exceptions import BudgetExceededError, ParameterRangeError, VacuousBoundError
from .models import VerificationReport, Violation
from .primitives import (
    MacFamily,
    ToeplitzMatrix,
    linear_map_all_keys,
    mac_epsilon,
    substitution_weights,
    tag_table,
)

logger = logging.getLogger(__name__)

SUBSET_SWEEP_MAX_BITS = 12
DEFAULT_SUBSET_BUDGET = 1 << 20
LHL_MAX_INPUT_BITS = 12
LHL_FULL_FAMILY_MAX_DIAGONALS = 20
LHL_DEFAULT_SAMPLES = 4096
MAX_STORED_VIOLATIONS = 20


def max_probability(P: KeyDistribution) -> Number:
    """p1 without sorting"""
    if P.is_dense:
        return P._value(P.weights.max())
    values = list(P.atoms.values())
    if len(values) < P.size:
        values.append(P.background)
    return max(values)


def _uniform_like(P: KeyDistribution) -> KeyDistribution:
    return KeyDistribution.uniform(P.n, exact=P.exact, dense=P.is_dense)


# =============================================================================
# SUBSET AND KPA ENUMERATION
# =============================================================================

def _subset_max(P: KeyDistribution, keys: np.ndarray, positions: Sequence[int]) -> Number:
    codes = extract_bits(keys, positions)
    size = 1 << len(positions)
    if not P.exact:
        return float(np.bincount(codes, weights=P.weights, minlength=size).max())
    totals = np.zeros(size, dtype=P.weights.dtype)
    np.add.at(totals, codes, P.weights)
    return Fraction(int(totals.max()), P.scale)


def subset_success(P: KeyDistribution, positions: Sequence[int]) -> Number:
    """Exact p1(K*): best guess of the bits at ``positions``"""
    positions = _check_positions(P.n, positions)
    if not positions:
        raise ParameterRangeError("subset must contain at least one position")
    P = P.to_dense()
    return _subset_max(P, np.arange(P.size, dtype=np.int64), positions)


@dataclass(frozen=True)
class SubsetSweep:
    success: Dict[Tuple[int, ...], Number]
    subsets_checked: int
    complete: bool


def exhaustive_subset_success(
    P: KeyDistribution,
    max_subset_size: Optional[int] = None,
    budget: int = DEFAULT_SUBSET_BUDGET,
) -> SubsetSweep:
    """
    Optimal guess probability for every bit-position subset, smallest first.

    Stops after ``budget`` subsets and flags the result incomplete.
    """
    if P.n > SUBSET_SWEEP_MAX_BITS:
        raise ParameterRangeError(
            f"subset sweeps are limited to {SUBSET_SWEEP_MAX_BITS}-bit keys, got {P.n}"
        )
    P = P.to_dense()
    keys = np.arange(P.size, dtype=np.int64)
    limit = P.n if max_subset_size is None else min(P.n, max_subset_size)
    success: Dict[Tuple[int, ...], Number] = {}
    for size in range(1, limit + 1):
        for subset in itertools.combinations(range(P.n), size):
            if len(success) >= budget:
                logger.warning(f"Subset sweep stopped at budget {budget}")
                return SubsetSweep(success=success, subsets_checked=len(success), complete=False)
            success[subset] = _subset_max(P, keys, subset)
    return SubsetSweep(success=success, subsets_checked=len(success), complete=True)


@dataclass(frozen=True)
class KpaReport:
    """Conditional whole-remainder guessing success for each known-part value"""

    known_positions: Tuple[int, ...]
    per_k1: Dict[int, Number]
    prefix_probability: Dict[int, Number]
    per_k1_ber: Dict[int, Number]
    weighted_average: Number
    worst: Number
    worst_k1: int


def exhaustive_kpa(P: KeyDistribution, known_positions: Sequence[int]) -> KpaReport:
    """
    Eve knows the bits at ``known_positions`` (value k1) and guesses the rest.

    k1 codes put bit j at the j-th smallest known position.
    """
    positions = sorted(_check_positions(P.n, known_positions))
    if not 1 <= len(positions) < P.n:
        raise ParameterRangeError(f"need between 1 and {P.n - 1} known positions, got {len(positions)}")
    P = P.to_dense()
    free = [i for i in range(P.n) if i not in positions]
    keys = np.arange(P.size, dtype=np.int64)
    known_codes = extract_bits(keys, positions)
    rest_codes = extract_bits(keys, free)
    rows, cols = 1 << len(positions), 1 << len(free)
    table = np.zeros((rows, cols), dtype=P.weights.dtype)
    table[known_codes, rest_codes] = P.weights

    row_sum = table.sum(axis=1)
    row_max = table.max(axis=1)
    rest_bits = len(free)
    errors = np.zeros(rows, dtype=table.dtype)
    for j in range(rest_bits):
        ones = table.reshape(rows, -1, 2, 1 << j).sum(axis=(1, 3))[:, 1]
        errors = errors + np.minimum(ones, row_sum - ones)

    per_k1: Dict[int, Number] = {}
    prefix: Dict[int, Number] = {}
    per_ber: Dict[int, Number] = {}
    for k1 in range(rows):
        if row_sum[k1] <= 0:
            continue
        if P.exact:
            per_k1[k1] = Fraction(int(row_max[k1]), int(row_sum[k1]))
            prefix[k1] = Fraction(int(row_sum[k1]), P.scale)
            per_ber[k1] = Fraction(int(errors[k1]), rest_bits * int(row_sum[k1]))
        else:
            per_k1[k1] = float(row_max[k1] / row_sum[k1])
            prefix[k1] = float(row_sum[k1])
            per_ber[k1] = float(errors[k1] / (rest_bits * row_sum[k1]))

    average = Fraction(int(row_max.sum()), P.scale) if P.exact else float(row_max.sum())
    worst_k1 = max(per_k1, key=lambda k: (per_k1[k], -k))
    return KpaReport(
        known_positions=tuple(positions),
        per_k1=per_k1,
        prefix_probability=prefix,
        per_k1_ber=per_ber,
        weighted_average=average,
        worst=per_k1[worst_k1],
        worst_k1=worst_k1,
    )


# =============================================================================
# PRIVACY AMPLIFICATION
# =============================================================================

@dataclass(frozen=True)
class LhlReport:
    input_bits: int
    output_bits: int
    min_entropy: float
    average_distance: float
    max_distance: float
    raw_bound: float
    bound: float
    vacuous: bool
    family_size: int
    enumerated: bool
    seed: Optional[int] = None

    @property
    def within_bound(self) -> bool:
        return self.average_distance <= self.bound + TOLERANCE


def hashed_distance(P: KeyDistribution, T: ToeplitzMatrix) -> float:
    """delta(T K', U) for one matrix"""
    images = linear_map_all_keys(T.to_array())
    hashed = np.bincount(images, weights=P.probabilities, minlength=1 << T.rows)
    return 0.5 * float(np.abs(hashed - 1.0 / (1 << T.rows)).sum())


def lhl_empirical(
    P: KeyDistribution,
    output_bits: int,
    family: str = "full",
    samples: int = LHL_DEFAULT_SAMPLES,
    seed: int = 0,
) -> LhlReport:
    """
    Family-averaged distance of the Toeplitz-hashed key from uniform, against
    the hashing guarantee 2^-(l - m)/2 with l the min-entropy of P.
    """
    if P.n > LHL_MAX_INPUT_BITS:
        raise ParameterRangeError(f"input limited to {LHL_MAX_INPUT_BITS} bits, got {P.n}")
    if not 1 <= output_bits <= P.n:
        raise ParameterRangeError(f"output_bits must lie in [1, {P.n}], got {output_bits}")
    diagonals = output_bits + P.n - 1
    if family == "full":
        if diagonals > LHL_FULL_FAMILY_MAX_DIAGONALS:
            raise BudgetExceededError(
                f"full Toeplitz family needs 2^{diagonals} matrices; use family='sample'"
            )
        matrices = ToeplitzMatrix.enumerate_family(output_bits, P.n)
        family_size = 1 << diagonals
        used_seed = None
    elif family == "sample":
        rng = np.random.default_rng(seed)
        matrices = (ToeplitzMatrix.random(output_bits, P.n, rng) for _ in range(samples))
        family_size = samples
        used_seed = seed
    else:
        raise ParameterRangeError(f"family must be 'full' or 'sample', got {family!r}")

    total = 0.0
    worst = 0.0
    for T in matrices:
        distance = hashed_distance(P, T)
        total += distance
        worst = max(worst, distance)
    l = min_entropy(P)
    raw = 2.0 ** (-(l - output_bits) / 2)
    report = LhlReport(
        input_bits=P.n,
        output_bits=output_bits,
        min_entropy=l,
        average_distance=total / family_size,
        max_distance=worst,
        raw_bound=raw,
        bound=min(1.0, raw),
        vacuous=raw > 1.0,
        family_size=family_size,
        enumerated=family == "full",
        seed=used_seed,
    )
    logger.debug(f"Hashing check n'={P.n} m={output_bits}: average={report.average_distance:.6g} bound={report.bound:.6g}")
    return report


# =============================================================================
# DISTINGUISHER
# =============================================================================

@dataclass(frozen=True)
class DistinguisherResult:
    formula_value: Number
    bayes_value: Number

    @property
    def agree(self) -> bool:
        return abs(float(self.formula_value) - float(self.bayes_value)) <= TOLERANCE


def optimal_distinguisher(P0: KeyDistribution, P1: KeyDistribution, prior0: Number) -> DistinguisherResult:
    """
    Best probability of deciding correctly between P0 (prior ``prior0``) and P1.

    Computed both from 1/2 + 1/2 sum |pi0 P0 - pi1 P1| and from the Bayes rule
    that picks the larger posterior for every observation.
    """
    if P0.n != P1.n:
        raise ParameterRangeError(f"distributions must share a domain, got {P0.n} and {P1.n} bits")
    P0, P1 = P0.to_dense(), P1.to_dense()
    if P0.exact and P1.exact:
        prior = to_fraction(prior0)
        if not 0 <= prior <= 1:
            raise ParameterRangeError(f"prior0 must lie in [0, 1], got {prior}")
        common = math.lcm(P0.scale, P1.scale)
        w0 = _rescale(P0.weights, P0.scale, common).astype(object)
        w1 = _rescale(P1.weights, P1.scale, common).astype(object)
        a = w0 * prior.numerator
        b = w1 * (prior.denominator - prior.numerator)
        denominator = prior.denominator * common
        formula = Fraction(1, 2) + Fraction(int(np.abs(a - b).sum()), 2 * denominator)
        bayes = Fraction(int(np.maximum(a, b).sum()), denominator)
        return DistinguisherResult(formula_value=formula, bayes_value=bayes)
    prior = float(prior0)
    if not 0.0 <= prior <= 1.0:
        raise ParameterRangeError(f"prior0 must lie in [0, 1], got {prior}")
    a = prior * P0.probabilities
    b = (1.0 - prior) * P1.probabilities
    return DistinguisherResult(
        formula_value=0.5 + 0.5 * float(np.abs(a - b).sum()),
        bayes_value=float(np.maximum(a, b).sum()),
    )


# =============================================================================
# POST-PROCESSING MONOTONICITY
# =============================================================================

@dataclass(frozen=True)
class MonotonicityReport:
    """Eve's whole-key guess at the sifted, corrected and final stages"""

    p1_sifted: Number
    p1_corrected: Number
    p1_final: Number
    ecc_identity: bool

    @property
    def monotone(self) -> bool:
        tol = 0 if isinstance(self.p1_sifted, Fraction) else TOLERANCE
        return self.p1_sifted <= self.p1_corrected + tol and self.p1_corrected <= self.p1_final + tol

    @property
    def triple(self) -> Tuple[Number, Number, Number]:
        return (self.p1_sifted, self.p1_corrected, self.p1_final)


def monotonicity_check(
    P: KeyDistribution,
    pac: Union[ToeplitzMatrix, np.ndarray],
    ecc_matrix: Optional[np.ndarray] = None,
) -> MonotonicityReport:
    """
    Exact p1 through a toy pipeline.

    The ECC step publishes the syndrome H k (no syndrome when ``ecc_matrix``
    is None); the PAC step outputs T k. Eve's best guess of the corrected key
    is sum_s max_{Hk=s} P(k); of the final key sum_s max_z P(Hk=s, Tk=z).
    """
    P = P.to_dense()
    matrix = pac.to_array() if isinstance(pac, ToeplitzMatrix) else np.asarray(pac)
    if matrix.shape[1] != P.n:
        raise ParameterRangeError(f"PAC expects {matrix.shape[1]} input bits, key has {P.n}")
    out_bits = matrix.shape[0]
    final_codes = linear_map_all_keys(matrix)
    if ecc_matrix is None:
        syndrome_bits = 0
        syndromes = np.zeros(P.size, dtype=np.int64)
    else:
        ecc_matrix = np.asarray(ecc_matrix)
        if ecc_matrix.shape[1] != P.n:
            raise ParameterRangeError(f"parity matrix expects {ecc_matrix.shape[1]} bits, key has {P.n}")
        syndrome_bits = ecc_matrix.shape[0]
        syndromes = linear_map_all_keys(ecc_matrix)

    weights = P.weights
    if P.exact and weights.dtype != object:
        weights = weights.astype(np.int64)
    zero = np.zeros(1 << syndrome_bits, dtype=weights.dtype)
    best_per_syndrome = zero.copy()
    np.maximum.at(best_per_syndrome, syndromes, weights)
    joint = np.zeros((1 << syndrome_bits) * (1 << out_bits), dtype=weights.dtype)
    np.add.at(joint, syndromes * (1 << out_bits) + final_codes, weights)
    best_final = joint.reshape(1 << syndrome_bits, 1 << out_bits).max(axis=1)

    if P.exact:
        sifted = Fraction(int(weights.max()), P.scale)
        corrected = Fraction(int(best_per_syndrome.sum()), P.scale)
        final = Fraction(int(best_final.sum()), P.scale)
    else:
        sifted = float(weights.max())
        corrected = float(best_per_syndrome.sum())
        final = float(best_final.sum())
    return MonotonicityReport(
        p1_sifted=sifted, p1_corrected=corrected, p1_final=final, ecc_identity=ecc_matrix is None
    )


# =============================================================================
# MAC ATTACKS
# =============================================================================

@lru_cache(maxsize=32)
def family_epsilon(family: MacFamily) -> float:
    return float(mac_epsilon(family))


@dataclass(frozen=True)
class MacAttackReport:
    epsilon: float
    key_delta: float
    tag_space: int
    per_tag_success: Dict[int, float]
    worst_tag_success: float
    average_success: float
    impersonation_success: float

    @property
    def average_cap(self) -> float:
        return min(1.0, self.epsilon + self.key_delta)

    @property
    def worst_tag_cap(self) -> float:
        return min(1.0, self.epsilon + self.key_delta * self.tag_space)

    @property
    def within_average_cap(self) -> bool:
        return self.average_success <= self.average_cap + 1e-9

    @property
    def within_worst_tag_cap(self) -> bool:
        return self.worst_tag_success <= self.worst_tag_cap + 1e-9


def mac_attack_search(family: MacFamily, key_distribution: KeyDistribution) -> MacAttackReport:
    """
    Optimal substitution attack when the MAC key follows ``key_distribution``.

    per_tag_success[t1] is the best P(h(m2) = t2 | h(m1) = t1) over m1 != m2
    and t2; average_success is the best sum_t1 max_t2 P(t1, t2) over pairs.
    """
    if key_distribution.n != family.key_bits:
        raise ParameterRangeError(
            f"key distribution has {key_distribution.n} bits, family keys have {family.key_bits}"
        )
    table = tag_table(family)
    weights = key_distribution.probabilities
    tags = family.tag_space
    per_tag: Dict[int, float] = {}
    best_average = 0.0
    impersonation = 0.0
    for m1 in range(family.message_count):
        W = substitution_weights(table, tags, m1, weights)
        seen = W[m1].sum(axis=1)
        impersonation = max(impersonation, float(seen.max()))
        W[m1] = 0.0
        best_average = max(best_average, float(W.max(axis=2).sum(axis=1).max()))
        peak = W.max(axis=(0, 2))
        for t1 in np.nonzero(seen > 0)[0]:
            ratio = float(peak[t1] / seen[t1])
            if ratio > per_tag.get(int(t1), -1.0):
                per_tag[int(t1)] = ratio
    uniform = KeyDistribution.uniform(family.key_bits, exact=False)
    return MacAttackReport(
        epsilon=family_epsilon(family),
        key_delta=float(stat_distance(key_distribution.to_float(), uniform)),
        tag_space=tags,
        per_tag_success=per_tag,
        worst_tag_success=max(per_tag.values()) if per_tag else 0.0,
        average_success=best_average,
        impersonation_success=impersonation,
    )


# =============================================================================
# VERIFICATION SWEEPS
# =============================================================================

# (instance label, "upper" or "lower", bound value, true value)
Check = Tuple[str, str, float, float]

FANO_BITS = 10
MONOTONICITY_BITS = 10
LHL_SWEEP_BITS = 6
COUPLING_SWEEP_BITS = 8
SWEEP_MAC_FAMILY = MacFamily(block_bits=3, blocks=2)


def _random_distribution(rng: np.random.Generator, n: int) -> KeyDistribution:
    """Mix of flat, spiky and near-uniform profiles"""
    size = 1 << n
    style = int(rng.integers(0, 3))
    if style == 0:
        probs = rng.dirichlet(np.ones(size))
    elif style == 1:
        probs = rng.dirichlet(np.full(size, 0.1))
    else:
        probs = _near_uniform(rng, n)
    return KeyDistribution(n, weights=probs / probs.sum())


def _near_uniform(rng: np.random.Generator, n: int) -> np.ndarray:
    size = 1 << n
    direction = rng.dirichlet(np.ones(size))
    t = 10.0 ** rng.uniform(-4.0, 0.0)
    probs = (1.0 - t) / size + t * direction
    return probs / probs.sum()


def _distance_to_uniform(P: KeyDistribution) -> float:
    return float(stat_distance(P, _uniform_like(P)))


def _sweep_subset_leak(index: int, seed: int, bits: int, budget: int) -> List[Check]:
    rng = np.random.default_rng([seed, index])
    constructed = [
        lambda: saturating_distribution(bits, [0], 0.1, exact=False),
        lambda: saturating_distribution(bits, list(range(bits)), 2.0 ** -4, exact=False),
        lambda: kpa_counterexample(bits, bits // 2, exact=False),
        lambda: spiked_distribution(bits, 2, exact=False),
    ]
    P = constructed[index]() if index < len(constructed) else _random_distribution(rng, bits)
    delta = _distance_to_uniform(P)
    sweep = exhaustive_subset_success(P, budget=budget)
    checks = []
    for subset, success in sweep.success.items():
        bound = bounds.subset_leak_bound(len(subset), delta).value
        checks.append((f"#{index} subset={list(subset)}", "upper", bound, float(success)))
    return checks


def _sweep_kpa_average(index: int, seed: int, bits: int, budget: int) -> List[Check]:
    rng = np.random.default_rng([seed, index])
    if index < bits - 1:
        m = index + 1
        P = kpa_counterexample(bits, m, exact=False)
    else:
        m = int(rng.integers(1, bits))
        P = _random_distribution(rng, bits)
    delta = _distance_to_uniform(P)
    report = exhaustive_kpa(P, list(range(m)))
    bound = bounds.kpa_average_bound(bits - m, delta).value
    return [(f"#{index} known={m}", "upper", bound, float(report.weighted_average))]


def _sweep_fano(index: int, seed: int, bits: int, budget: int) -> List[Check]:
    rng = np.random.default_rng([seed, index])
    P = KeyDistribution(FANO_BITS, weights=_near_uniform(rng, FANO_BITS))
    delta = _distance_to_uniform(P)
    try:
        bound = bounds.fano_ber_bound(FANO_BITS, delta).value
    except VacuousBoundError:
        return []
    return [(f"#{index} delta={delta:.3g}", "lower", bound, float(optimal_ber(P)))]


def _sweep_pinsker(index: int, seed: int, bits: int, budget: int) -> List[Check]:
    rng = np.random.default_rng([seed, index])
    P = _random_distribution(rng, bits)
    delta = _distance_to_uniform(P)
    leak = information_leak(P)
    band = bounds.pinsker_band(delta, bits)
    checks = [(f"#{index} lower", "lower", band.details["lower"], leak)]
    if band.details["upper"] is not None:
        checks.append((f"#{index} upper", "upper", band.details["upper"], leak))
    return checks


def _sweep_lhl(index: int, seed: int, bits: int, budget: int) -> List[Check]:
    rng = np.random.default_rng([seed, index])
    n = LHL_SWEEP_BITS
    P = _random_distribution(rng, n) if index else KeyDistribution.uniform(n, exact=False)
    m = int(rng.integers(1, n))
    report = lhl_empirical(P, m, family="full")
    return [(f"#{index} m={m}", "upper", report.bound, report.average_distance)]


def _random_full_rank_toeplitz(rng: np.random.Generator, rows: int, cols: int) -> ToeplitzMatrix:
    while True:
        T = ToeplitzMatrix.random(rows, cols, rng)
        if T.full_rank:
            return T


def _sweep_monotonicity(index: int, seed: int, bits: int, budget: int) -> List[Check]:
    rng = np.random.default_rng([seed, index])
    n = MONOTONICITY_BITS
    P = _random_distribution(rng, n)
    pac = _random_full_rank_toeplitz(rng, int(rng.integers(1, n)), n)
    parity_rows = int(rng.integers(0, 4))
    ecc = rng.integers(0, 2, size=(parity_rows, n)) if parity_rows else None
    report = monotonicity_check(P, pac, ecc)
    return [
        (f"#{index} sifted<=corrected", "upper", float(report.p1_corrected), float(report.p1_sifted)),
        (f"#{index} corrected<=final", "upper", float(report.p1_final), float(report.p1_corrected)),
    ]


def _spiked_mac_key(rng: np.random.Generator, family: MacFamily) -> KeyDistribution:
    l = int(rng.integers(1, family.key_bits))
    k0 = int(rng.integers(0, family.key_space))
    return spiked_distribution(family.key_bits, l, k0=k0, exact=False)


def _sweep_mac_average(index: int, seed: int, bits: int, budget: int) -> List[Check]:
    rng = np.random.default_rng([seed, index])
    family = SWEEP_MAC_FAMILY
    if index % 2:
        key = _spiked_mac_key(rng, family)
    else:
        key = _random_distribution(rng, family.key_bits)
    report = mac_attack_search(family, key)
    bound = bounds.mac_bounds(report.epsilon, report.key_delta, family.tag_space).details["p_s_avg"]
    return [(f"#{index}", "upper", bound, report.average_success)]


def _sweep_mac_worst_tag(index: int, seed: int, bits: int, budget: int) -> List[Check]:
    rng = np.random.default_rng([seed, index])
    family = SWEEP_MAC_FAMILY
    report = mac_attack_search(family, _spiked_mac_key(rng, family))
    bound = bounds.mac_bounds(report.epsilon, report.key_delta, family.tag_space).details["p_s_max"]
    return [(f"#{index}", "upper", bound, report.worst_tag_success)]


def _sweep_distinguisher(index: int, seed: int, bits: int, budget: int) -> List[Check]:
    rng = np.random.default_rng([seed, index])
    P0 = _random_distribution(rng, bits)
    P1 = _random_distribution(rng, bits)
    result = optimal_distinguisher(P0, P1, float(rng.uniform()))
    gap = abs(float(result.formula_value) - float(result.bayes_value))
    return [(f"#{index}", "upper", TOLERANCE, gap)]


def _sweep_markov(index: int, seed: int, bits: int, budget: int) -> List[Check]:
    rng = np.random.default_rng([seed, index])
    samples = rng.exponential(scale=10.0 ** rng.uniform(-9, 0), size=256)
    mean = float(samples.mean())
    gamma = float(np.quantile(samples, rng.uniform(0.5, 0.999)))
    if gamma <= 0:
        return []
    fraction = float((samples >= gamma).mean())
    return [(f"#{index}", "upper", bounds.markov_tail(mean, gamma).value, fraction)]


def _sweep_triangle(index: int, seed: int, bits: int, budget: int) -> List[Check]:
    rng = np.random.default_rng([seed, index])
    P, Q, R = (_random_distribution(rng, bits) for _ in range(3))
    total = float(stat_distance(P, Q)) + float(stat_distance(Q, R))
    return [(f"#{index}", "upper", total, float(stat_distance(P, R)))]


def _sweep_coupling(index: int, seed: int, bits: int, budget: int) -> List[Check]:
    rng = np.random.default_rng([seed, index])
    n = min(bits, COUPLING_SWEEP_BITS)
    P = _random_distribution(rng, n)
    Q = _random_distribution(rng, n)
    delta = float(stat_distance(P, Q))
    maximal = maximal_coupling(P, Q).agreement_probability
    greedy = greedy_coupling(P, Q, rng).agreement_probability
    return [
        (f"#{index} maximal", "upper", 1e-9, abs(maximal - (1.0 - delta))),
        (f"#{index} greedy", "upper", 1.0 - delta, greedy),
    ]


def _sweep_per_bit_fallacy(index: int, seed: int, bits: int, budget: int) -> List[Check]:
    rng = np.random.default_rng([seed, index])
    n = int(rng.integers(2, bits + 1))
    d = float(min(10.0 ** rng.uniform(-6, -0.5), 1.0 - 2.0 ** -n))
    P = saturating_distribution(n, list(range(n)), d, exact=False)
    true_p1 = float(max_probability(P))
    return [(f"#{index} n={n} d={d:.3g}", "upper", bounds.per_bit_fallacy(d, n).value, true_p1)]


def _sweep_ber_fallacy(index: int, seed: int, bits: int, budget: int) -> List[Check]:
    rng = np.random.default_rng([seed, index])
    n = 1 + index % min(bits, 8)
    d = float(rng.uniform(0.01, 0.5))
    P = ber_counterexample_search(n, d, seed=seed + index, budget=2000)
    if P is None:
        return []
    return [(f"#{index} n={n} d={d:.3g}", "lower", bounds.ber_fallacy_bound(d).value, float(optimal_ber(P)))]


def _sweep_mixture_reading(index: int, seed: int, bits: int, budget: int) -> List[Check]:
    rng = np.random.default_rng([seed, index])
    n = int(rng.integers(2, bits + 1))
    m = int(rng.integers(1, n))
    P = kpa_counterexample(n, m)
    verdict = mixture_feasibility(P, stat_distance(P, _uniform_like(P)))
    return [(f"#{index} n={n} m={m}", "upper", verdict.upper, float(P.prob(0)))]


@dataclass(frozen=True)
class SweepSpec:
    runner: Callable[[int, int, int, int], List[Check]]
    summary: str
    kind: str = "soundness"
    flagged: bool = False
    cost: float = 1.0
    # Checks per instance when nothing is cut short, by key length
    full_checks: Optional[Callable[[int], int]] = None


SWEEPS: Dict[str, SweepSpec] = {
    "subset_leak": SweepSpec(
        _sweep_subset_leak, "every bit subset: best guess <= 2^-|K*| + d",
        full_checks=lambda bits: (1 << bits) - 1,
    ),
    "kpa_average": SweepSpec(_sweep_kpa_average, "known prefix: average remainder guess <= 2^-|K2| + d"),
    "fano": SweepSpec(_sweep_fano, "optimal BER >= Fano bound for near-uniform keys"),
    "pinsker": SweepSpec(_sweep_pinsker, "information leak inside the Pinsker band"),
    "lhl": SweepSpec(_sweep_lhl, "full Toeplitz family: average d of hashed key <= leftover-hash bound", cost=0.05),
    "monotonicity": SweepSpec(_sweep_monotonicity, "p1 never decreases from sifted to corrected to final key"),
    "mac_average": SweepSpec(_sweep_mac_average, "average forgery success <= epsilon + d", cost=0.05),
    "mac_worst_tag": SweepSpec(_sweep_mac_worst_tag, "worst single tag within epsilon + d * tag space", cost=0.05),
    "distinguisher": SweepSpec(_sweep_distinguisher, "closed-form optimal distinguisher equals Bayes decision"),
    "markov": SweepSpec(_sweep_markov, "sample tail fractions obey the Markov inequality"),
    "triangle": SweepSpec(_sweep_triangle, "statistical distance obeys the triangle inequality"),
    "coupling": SweepSpec(_sweep_coupling, "maximal coupling meets 1 - d; greedy couplings stay below it", cost=0.2),
    "per_bit_fallacy": SweepSpec(
        _sweep_per_bit_fallacy, "per-bit failure reading (d/n)^n underestimates p1",
        kind="refutation", flagged=True, cost=0.1,
    ),
    "ber_fallacy": SweepSpec(
        _sweep_ber_fallacy, "BER >= (1 - d)/2 fails on searched distributions",
        kind="refutation", flagged=True, cost=0.02,
    ),
    "mixture_reading": SweepSpec(
        _sweep_mixture_reading, "reading d as a failure probability is infeasible",
        kind="refutation", flagged=True, cost=0.1,
    ),
}


def _run_chunk(
    name: str, seed: int, bits: int, budget: int, indices: Sequence[int]
) -> List[Tuple[int, List[Check]]]:
    runner = SWEEPS[name].runner
    return [(i, runner(i, seed, bits, budget)) for i in indices]


def _slack(direction: str, bound: float, true: float) -> float:
    return bound - true if direction == "upper" else true - bound


def run_sweep(
    name: str,
    instances: int = 1000,
    seed: int = 0,
    bits: int = 6,
    workers: int = 1,
    subset_budget: int = DEFAULT_SUBSET_BUDGET,
) -> VerificationReport:
    """
    Run one named sweep and reduce its checks into a report.

    A soundness violation is a true value beyond its bound; a refutation
    "violation" is a confirmed failure of the flagged formula.
    ``subset_budget`` caps the subsets enumerated per instance; a sweep cut
    short by it is reported incomplete.
    """
    if name not in SWEEPS:
        raise ParameterRangeError(f"unknown sweep '{name}'; choose from {sorted(SWEEPS)}")
    if not 2 <= bits <= SUBSET_SWEEP_MAX_BITS:
        raise ParameterRangeError(f"sweep bits must lie in [2, {SUBSET_SWEEP_MAX_BITS}], got {bits}")
    if subset_budget < 1:
        raise ParameterRangeError(f"subset budget must be positive, got {subset_budget}")
    spec = SWEEPS[name]
    count = max(3, int(math.ceil(instances * spec.cost)))
    indices = list(range(count))

    if workers > 1:
        chunk = max(1, math.ceil(count / (workers * 4)))
        chunks = [indices[i:i + chunk] for i in range(0, count, chunk)]
        n_chunks = len(chunks)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(_run_chunk, [name] * n_chunks, [seed] * n_chunks, [bits] * n_chunks,
                             [subset_budget] * n_chunks, chunks)
            results = [item for part in parts for item in part]
    else:
        results = _run_chunk(name, seed, bits, subset_budget, indices)

    slacks: List[float] = []
    violations: List[Violation] = []
    violation_count = 0
    complete = True
    for _, checks in results:
        if spec.full_checks is not None and len(checks) < spec.full_checks(bits):
            complete = False
        for label, direction, bound, true in checks:
            slack = _slack(direction, bound, true)
            slacks.append(slack)
            if slack < -TOLERANCE:
                violation_count += 1
                if len(violations) < MAX_STORED_VIOLATIONS:
                    violations.append(Violation(instance=label, bound_value=bound, true_value=true))

    report = VerificationReport(
        bound_name=name,
        kind=spec.kind,
        flagged=spec.flagged,
        instances_checked=len(slacks),
        min_slack=min(slacks) if slacks else None,
        max_slack=max(slacks) if slacks else None,
        violation_count=violation_count,
        violations=violations,
        seed=seed,
        complete=complete,
    )
    level = logging.WARNING if report.failed else logging.INFO
    logger.log(level, f"Sweep {name}: {report.instances_checked} checks, {violation_count} violations")
    return report


def verify_suite(
    names: Optional[Sequence[str]] = None,
    instances: int = 1000,
    seed: int = 0,
    bits: int = 6,
    workers: int = 1,
    subset_budget: int = DEFAULT_SUBSET_BUDGET,
) -> List[VerificationReport]:
    """All requested sweeps, soundness first, in registry order"""
    selected = list(SWEEPS) if not names else list(names)
    return [
        run_sweep(name, instances=instances, seed=seed, bits=bits, workers=workers, subset_budget=subset_budget)
        for name in selected
    ]
