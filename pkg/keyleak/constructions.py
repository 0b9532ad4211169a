"""
KeyLeak Constructions

Counter-example and bound-saturating key distributions, mixture feasibility,
and couplings.

The all-zero key is the default distinguished key k0 everywhere.
"""
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .distributions import (
    DENSE_MAX_BITS,
    TOLERANCE,
    KeyDistribution,
    Number,
    _check_positions,
    extract_bits,
    information_leak,
    ordered_profile,
    optimal_ber,
    stat_distance,
    to_fraction,
)
from .exceptions import BudgetExceededError, InfeasibleParameterError, ParameterRangeError

logger = logging.getLogger(__name__)

BER_SEARCH_BUDGET = 100_000
BER_SEARCH_MAX_BITS = 12
COUPLING_MAX_BITS = 11


def _number(value, exact: bool) -> Number:
    return to_fraction(value) if exact else float(value)


def kpa_counterexample(n: int, m: int, k0: int = 0, exact: bool = True) -> KeyDistribution:
    """
    Key whose first m bits, once known, reveal the rest.

    p(k0) = 2^-m, every other key sharing k0's m-bit prefix gets 0, and all
    keys with a different prefix keep 2^-n. The distance to uniform is
    2^-m - 2^-n.
    """
    if not 1 <= m < n <= DENSE_MAX_BITS:
        raise ParameterRangeError(f"need 1 <= m < n <= {DENSE_MAX_BITS}, got n={n}, m={m}")
    if not 0 <= k0 < (1 << n):
        raise ParameterRangeError(f"k0={k0} outside a {n}-bit key space")
    keys = np.arange(1 << n, dtype=np.int64)
    prefix = (1 << m) - 1
    index = np.ones(1 << n, dtype=np.int64)
    index[(keys & prefix) == (k0 & prefix)] = 0
    index[k0] = 2
    levels = [Fraction(0), Fraction(1, 1 << n), Fraction(1, 1 << m)]
    return KeyDistribution.from_levels(n, levels, index, exact=exact)


def saturating_distribution(
    n: int,
    positions: Sequence[int],
    delta: Number,
    subset_value: int = 0,
    exact: bool = True,
) -> KeyDistribution:
    """
    Distribution meeting the subset-leak bound with equality.

    The smallest key whose subset bits equal ``subset_value`` gains delta;
    delta is removed evenly from every key with a different subset value.
    Keys sharing the subset value keep 2^-n.

    Raises:
        InfeasibleParameterError: if delta > 1 - 2^-|positions|.
    """
    if not 1 <= n <= DENSE_MAX_BITS:
        raise ParameterRangeError(f"n must lie in [1, {DENSE_MAX_BITS}], got {n}")
    positions = _check_positions(n, positions)
    s = len(positions)
    if s == 0:
        raise ParameterRangeError("subset must contain at least one position")
    if not 0 <= subset_value < (1 << s):
        raise ParameterRangeError(f"subset value {subset_value} does not fit {s} bits")
    delta = to_fraction(delta)
    feasible_max = 1 - Fraction(1, 1 << s)
    if delta < 0:
        raise ParameterRangeError(f"delta must be non-negative, got {delta}")
    if delta > feasible_max:
        raise InfeasibleParameterError(
            f"delta={float(delta)} exceeds the removable mass; feasible maximum is {float(feasible_max)}",
            feasible_max=float(feasible_max),
        )

    size = 1 << n
    k_star = 0
    for j, pos in enumerate(positions):
        if (subset_value >> j) & 1:
            k_star |= 1 << pos
    codes = extract_bits(np.arange(size, dtype=np.int64), positions)
    differing = size - (size >> s)
    base = Fraction(1, size)
    index = np.where(codes == subset_value, 1, 0).astype(np.int64)
    index[k_star] = 2
    levels = [base - delta / differing, base, base + delta]
    logger.debug(f"Saturating distribution n={n} subset={positions} delta={delta}")
    return KeyDistribution.from_levels(n, levels, index, exact=exact)


def spiked_distribution(
    n: int, l: int, k0: int = 0, exact: bool = True, dense: Optional[bool] = None
) -> KeyDistribution:
    """p(k0) = 2^-l with the remaining mass uniform on the other keys"""
    if not 1 <= l < n:
        raise ParameterRangeError(f"need 1 <= l < n, got n={n}, l={l}")
    spike = Fraction(1, 1 << l)
    return KeyDistribution.from_atoms(
        n, {k0: spike}, background="uniform", exact=exact, dense=dense
    )


@dataclass(frozen=True)
class SpikedSummary:
    n: int
    l: int
    p1: float
    uniform_level: float
    information_leak: float
    leak_per_bit: float
    spike_level: float


def spiked_summary(n: int, l: int) -> SpikedSummary:
    """Exact leak of the spiked distribution against its whole-key guess"""
    P = spiked_distribution(n, l, dense=False)
    leak = information_leak(P)
    return SpikedSummary(
        n=n,
        l=l,
        p1=float(ordered_profile(P).p1),
        uniform_level=2.0 ** -n,
        information_leak=leak,
        leak_per_bit=leak / n,
        spike_level=2.0 ** -l,
    )


def spike_mixture(n: int, lam: Number, k0: int = 0, exact: bool = True) -> KeyDistribution:
    """(1 - lam) U + lam * point(k0)"""
    lam = _number(lam, exact)
    if not 0 <= lam <= 1:
        raise ParameterRangeError(f"lambda must lie in [0, 1], got {lam}")
    size = 1 << n
    if exact:
        background = (1 - lam) / size
    else:
        background = (1.0 - lam) / size
    return KeyDistribution.from_atoms(
        n, {k0: background + lam}, background=background, exact=exact
    )


def biased_bits_distribution(n: int, bias: Number, exact: bool = True) -> KeyDistribution:
    """Independent bits, each 0 with probability ``bias``"""
    bias = _number(bias, exact)
    if not 0 <= bias <= 1:
        raise ParameterRangeError(f"bias must lie in [0, 1], got {bias}")
    return KeyDistribution.independent_bits([1 - bias] * n, exact=exact)


# =============================================================================
# MIXTURE FEASIBILITY
# =============================================================================

@dataclass(frozen=True)
class MixtureFeasibility:
    feasible: bool
    lam: float
    lower: float
    upper: float
    violating_index: Optional[int] = None
    violating_value: Optional[float] = None


def mixture_feasibility(P: KeyDistribution, lam: Number) -> MixtureFeasibility:
    """
    Whether P = (1 - lam) U + lam P' for some distribution P'.

    Holds iff (1 - lam)/N <= p_i <= lam + (1 - lam)/N for every key.
    The first violating key (ascending) is reported.
    """
    exact = P.exact
    lam = _number(lam, exact)
    if not 0 <= lam <= 1:
        raise ParameterRangeError(f"lambda must lie in [0, 1], got {lam}")
    lower = (1 - lam) / P.size
    upper = lam + lower
    tol = 0 if exact else TOLERANCE

    def verdict(index: Optional[int], value=None) -> MixtureFeasibility:
        return MixtureFeasibility(
            feasible=index is None,
            lam=float(lam),
            lower=float(lower),
            upper=float(upper),
            violating_index=index,
            violating_value=None if value is None else float(value),
        )

    if P.is_dense:
        if exact:
            weights = P.weights.astype(object)
            lo = lower * P.scale
            hi = upper * P.scale
            # w < lo  <=>  w * lo.den < lo.num, all in integers
            bad = (weights * lo.denominator < lo.numerator) | (weights * hi.denominator > hi.numerator)
            bad = bad.astype(bool)
        else:
            p = P.probabilities
            bad = (p < lower - tol) | (p > upper + tol)
        hits = np.nonzero(bad)[0]
        if hits.size == 0:
            return verdict(None)
        index = int(hits[0])
        return verdict(index, P.prob(index))

    candidates = []
    for key, value in P.atoms.items():
        if value < lower - tol or value > upper + tol:
            candidates.append(key)
    background = P.background
    if len(P.atoms) < P.size and (background < lower - tol or background > upper + tol):
        key = 0
        while key in P.atoms:
            key += 1
        candidates.append(key)
    if not candidates:
        return verdict(None)
    index = min(candidates)
    return verdict(index, P.prob(index))


# =============================================================================
# COUPLINGS
# =============================================================================

@dataclass(frozen=True)
class CouplingTable:
    """Joint distribution of (X, Y) with prescribed marginals"""

    joint: np.ndarray

    @property
    def agreement_probability(self) -> float:
        """P(X = Y)"""
        return float(np.trace(self.joint))

    @property
    def row_marginal(self) -> np.ndarray:
        return self.joint.sum(axis=1)

    @property
    def col_marginal(self) -> np.ndarray:
        return self.joint.sum(axis=0)

    def is_valid(self, P: KeyDistribution, Q: KeyDistribution, tolerance: float = 1e-9) -> bool:
        return bool(
            (self.joint >= -TOLERANCE).all()
            and np.allclose(self.row_marginal, P.probabilities, atol=tolerance)
            and np.allclose(self.col_marginal, Q.probabilities, atol=tolerance)
        )


def _coupling_inputs(P: KeyDistribution, Q: KeyDistribution):
    if P.n != Q.n:
        raise ParameterRangeError(f"coupling needs a shared domain, got {P.n} and {Q.n} bits")
    if P.n > COUPLING_MAX_BITS:
        raise BudgetExceededError(
            f"coupling tables are limited to {COUPLING_MAX_BITS}-bit keys, got {P.n}"
        )
    return P.probabilities, Q.probabilities


def maximal_coupling(P: KeyDistribution, Q: KeyDistribution) -> CouplingTable:
    """
    Coupling with P(X = Y) = 1 - delta(P, Q): the common mass min(P, Q) on the
    diagonal, the residuals coupled independently off it.
    """
    p, q = _coupling_inputs(P, Q)
    common = np.minimum(p, q)
    joint = np.diag(common)
    delta = 1.0 - float(common.sum())
    if delta > TOLERANCE:
        # Residuals have disjoint supports, so this adds nothing to the diagonal
        joint = joint + np.outer(p - common, q - common) / delta
    return CouplingTable(joint=joint)


def product_coupling(P: KeyDistribution, Q: KeyDistribution) -> CouplingTable:
    p, q = _coupling_inputs(P, Q)
    return CouplingTable(joint=np.outer(p, q))


def greedy_coupling(P: KeyDistribution, Q: KeyDistribution, rng: np.random.Generator) -> CouplingTable:
    """North-west corner coupling after random row and column permutations"""
    p, q = _coupling_inputs(P, Q)
    rows = rng.permutation(p.size)
    cols = rng.permutation(q.size)
    joint = np.zeros((p.size, q.size))
    row_left = p[rows].copy()
    col_left = q[cols].copy()
    i = j = 0
    while i < p.size and j < q.size:
        amount = min(row_left[i], col_left[j])
        joint[rows[i], cols[j]] += amount
        row_left[i] -= amount
        col_left[j] -= amount
        if row_left[i] <= TOLERANCE * 1e-3:
            i += 1
        else:
            j += 1
    return CouplingTable(joint=joint)


# =============================================================================
# BER COUNTER-EXAMPLE SEARCH
# =============================================================================

def _violates_ber_reading(P: KeyDistribution, d: float) -> bool:
    return float(stat_distance(P, KeyDistribution.uniform(P.n, exact=False))) <= d + TOLERANCE and float(
        optimal_ber(P)
    ) < (1.0 - d) / 2 - TOLERANCE


def ber_counterexample_search(
    n: int, d: float, seed: int = 0, budget: int = BER_SEARCH_BUDGET
) -> Optional[KeyDistribution]:
    """
    Find P with delta(P, U) <= d whose optimal BER is below (1 - d)/2.

    Tries common-bias independent bits, then spike mixtures, then seeded
    random perturbations of uniform scaled to distance d. Returns None when
    the budget runs out, which proves nothing.
    """
    if not 1 <= n <= BER_SEARCH_MAX_BITS:
        raise ParameterRangeError(f"search supports 1 <= n <= {BER_SEARCH_MAX_BITS}, got {n}")
    d = float(d)
    if d <= 0.0 or d >= 1.0:
        logger.info(f"No BER counter-example possible at d={d}")
        return None
    uniform = KeyDistribution.uniform(n, exact=False)
    tried = 0

    # Strongest common bias whose distance stays within d
    for bias in np.linspace(1.0, 0.5, 65):
        if tried >= budget:
            return None
        tried += 1
        candidate = biased_bits_distribution(n, float(bias), exact=False)
        if _violates_ber_reading(candidate, d):
            logger.info(f"BER counter-example: biased bits {bias:.4f} after {tried} candidates")
            return candidate

    size = 1 << n
    lam = min(1.0, d / (1.0 - 1.0 / size))
    if tried < budget:
        tried += 1
        candidate = spike_mixture(n, lam, exact=False)
        if _violates_ber_reading(candidate, d):
            logger.info(f"BER counter-example: spike mixture lambda={lam:.6g} after {tried} candidates")
            return candidate

    rng = np.random.default_rng(seed)
    base = uniform.probabilities
    while tried < budget:
        tried += 1
        direction = rng.dirichlet(np.ones(size))
        distance = 0.5 * float(np.abs(direction - base).sum())
        if distance <= 0.0:
            continue
        t = min(1.0, d / distance)
        probs = base + t * (direction - base)
        candidate = KeyDistribution(n, weights=probs / probs.sum())
        if _violates_ber_reading(candidate, d):
            logger.info(f"BER counter-example: random restart after {tried} candidates")
            return candidate
    logger.info(f"No BER counter-example within budget {budget}")
    return None
